#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace twpa {

inline constexpr double kFluxQuantum = 2.067833848e-15;  // Wb
inline constexpr double kBoltzmann = 1.380649e-23;       // J/K
inline constexpr double kPi = 3.14159265358979323846;

/// Thrown when a physical quantity leaves the range where the circuit model is valid,
/// e.g. a junction driven at or past its critical current.
class ModelDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class JosephsonJunction {
public:
    explicit JosephsonJunction(double critical_current);

    [[nodiscard]] double critical_current() const noexcept { return critical_current_; }
    [[nodiscard]] double zero_bias_inductance() const noexcept { return zero_bias_inductance_; }

private:
    double critical_current_;
    double zero_bias_inductance_;
};

struct UnitCell {
    UnitCell(JosephsonJunction jj, double shunt_capacitance);

    JosephsonJunction junction;
    double shunt_capacitance;
};

/// N-cell chain: node 0 is the input port, cell k places its junction between node k-1
/// and node k and its capacitor from node k to ground. Node N is the output port.
class LadderNetwork {
public:
    LadderNetwork(std::vector<UnitCell> cells, double source_impedance, double load_impedance,
                  double dc_bias_current);

    static LadderNetwork uniform(std::size_t n_cells, double critical_current, double capacitance,
                                 double dc_bias_current, double source_impedance = 50.0,
                                 double load_impedance = 50.0);

    [[nodiscard]] std::size_t size() const noexcept { return cells_.size(); }
    [[nodiscard]] std::size_t num_nodes() const noexcept { return cells_.size() + 1; }
    [[nodiscard]] const std::vector<UnitCell>& cells() const noexcept { return cells_; }
    [[nodiscard]] const UnitCell& cell(std::size_t k) const { return cells_.at(k); }
    [[nodiscard]] double source_impedance() const noexcept { return source_impedance_; }
    [[nodiscard]] double load_impedance() const noexcept { return load_impedance_; }
    [[nodiscard]] double dc_bias_current() const noexcept { return dc_bias_current_; }
    [[nodiscard]] double min_critical_current() const noexcept;

private:
    std::vector<UnitCell> cells_;
    double source_impedance_;
    double load_impedance_;
    double dc_bias_current_;
};

/// Pump and signal drive. Exactly one of pump_power_dbm / pump_current_amplitude is given.
/// The pump current amplitude is the peak current of the Norton source (in parallel with
/// the source impedance); a matched load receives half of it.
struct DriveSpec {
    double pump_frequency = 0.0;
    std::optional<double> pump_power_dbm;
    std::optional<double> pump_current_amplitude;
    double signal_frequency = 0.0;
    double signal_power_dbm = -150.0;

    [[nodiscard]] double norton_pump_amplitude(double source_impedance) const;
    void validate() const;
};

// Junction relations

/// L_J0 / sqrt(1 - (i/I_c)^2). Throws ModelDomainError for |i| >= I_c.
[[nodiscard]] double jj_inductance(double current, const JosephsonJunction& jj);

/// I_c sin(phase)
[[nodiscard]] double junction_current_from_phase(double phase, const JosephsonJunction& jj) noexcept;

[[nodiscard]] double characteristic_impedance(const UnitCell& cell, double bias);
[[nodiscard]] double cutoff_frequency(const UnitCell& cell, double bias);

/// Peak current of a sinusoid delivering p dBm into a matched resistance z.
[[nodiscard]] double power_dbm_to_current_amplitude(double p_dbm, double z);
[[nodiscard]] double current_amplitude_to_power_dbm(double amplitude, double z);

}  // namespace twpa
