#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "twpa/circuit.hpp"
#include "twpa/polyamp.hpp"

namespace twpa {

enum class AnalysisKind { gain, noise, poly, cyclo };

[[nodiscard]] const char* to_string(AnalysisKind kind) noexcept;

struct CircuitConfig {
    std::size_t cells = 0;
    double critical_current = 1.4e-6;
    double capacitance = 93e-15;
    double bias = 0.0;
    double source_impedance = 50.0;
    double load_impedance = 50.0;
};

struct DriveConfig {
    double pump_frequency = 8.03e9;
    std::vector<double> pump_power_dbm;   // either this ...
    std::vector<double> pump_current;     // ... or Norton peak amplitudes (A)
    double signal_power_dbm = -150.0;
};

/// One curve family; all cases of an experiment share the analysis section.
struct CaseConfig {
    std::string name;
    CircuitConfig circuit;
    DriveConfig drive;
    std::array<double, 5> coefficients{0.0, 1.0, 0.0, 0.0, 0.0};
};

struct AnalysisConfig {
    AnalysisKind kind = AnalysisKind::gain;
    int harmonics = 9;
    int time_samples = 64;

    // gain
    double signal_start = 2e9;
    double signal_stop = 14e9;
    double signal_step = 0.05e9;

    // noise, poly, cyclo
    std::filesystem::path mask;  // relative paths resolve against the config file
    double offset_start = 1.0;
    double offset_stop = 1e9;
    int points_per_decade = 10;
    std::vector<long> nodes;  // negative counts from the output end; empty = input and output
    bool thermal = false;
    double temperature = 0.02;

    // poly, cyclo
    std::vector<double> carrier_amplitudes;
    bool monte_carlo = false;
    std::vector<double> mc_offsets;
    MonteCarloOptions mc;
};

struct ExperimentConfig {
    std::string name;
    std::filesystem::path source;  // the config file, if any
    AnalysisConfig analysis;
    std::vector<CaseConfig> cases;
    std::filesystem::path output_directory = "out";

    [[nodiscard]] std::filesystem::path mask_path() const;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Diagnostic {
    enum class Severity { warning, error };
    Severity severity;
    std::string message;
};

struct ValidationResult {
    std::optional<ExperimentConfig> config;
    std::vector<Diagnostic> diagnostics;
    [[nodiscard]] bool ok() const noexcept;
};

/// INI-style text: [experiment], [circuit], [drive], [analysis], [output], and optional
/// [case NAME] sections whose "section.key" entries override the shared sections.
[[nodiscard]] ExperimentConfig parse_config(const std::string& text,
                                            const std::filesystem::path& source = {});
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);

/// Physical checks on a parsed config.
[[nodiscard]] std::vector<Diagnostic> check_config(const ExperimentConfig& cfg);
[[nodiscard]] ValidationResult validate_config(const std::filesystem::path& path);

/// Resolved config in the same text format; re-running it reproduces the outputs.
[[nodiscard]] std::string format_config(const ExperimentConfig& cfg);

/// Pump level below which validate_config stays quiet, as a fraction of I_c reached by
/// |bias| plus the line pump current.
inline constexpr double kPumpWarningFraction = 0.85;

struct RunOptions {
    std::optional<std::filesystem::path> output_directory;
    std::optional<std::uint64_t> seed;
};

struct RunSummary {
    int status = 0;  // 0 ok, 2 partial (solver failure)
    std::vector<std::filesystem::path> files;
    std::vector<Diagnostic> diagnostics;
    std::filesystem::path directory;
};

[[nodiscard]] RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

}  // namespace twpa
