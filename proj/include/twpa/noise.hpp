#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "twpa/hb.hpp"

namespace twpa {

struct LeesonParams {
    double noise_factor = 1.0;
    double temperature = 290.0;      // K
    double tone_power = 1e-3;        // W
    double loaded_q = 1e3;
    double center_frequency = 1e10;  // Hz
    double corner_frequency = 1e4;   // Hz

    void validate() const;
};

/// S_phi(df) = F k T / (2P) [1 + (f_c / (2 Q df))^2] (1 + f_corner / df), rad^2/Hz.
[[nodiscard]] double leeson_spectrum(const LeesonParams& p, double offset);
[[nodiscard]] std::vector<double> leeson_spectrum(const LeesonParams& p,
                                                  std::span<const double> offsets);

/// Piecewise SSB phase-noise specification, linear in dBc/Hz versus log10(offset) between
/// points and held constant beyond either end.
class PhaseNoiseMask {
public:
    struct Point {
        double offset;     // Hz
        double level_dbc;  // dBc/Hz
    };

    explicit PhaseNoiseMask(std::vector<Point> points);

    /// Text format: one "offset_hz level_dbc_per_hz" pair per line, '#' starts a comment.
    static PhaseNoiseMask parse(const std::string& text);
    static PhaseNoiseMask load(const std::filesystem::path& path);
    /// Samples a Leeson spectrum (as L = S_phi / 2) at the given offsets.
    static PhaseNoiseMask from_leeson(const LeesonParams& p, std::span<const double> offsets);

    [[nodiscard]] const std::vector<Point>& points() const noexcept { return points_; }
    [[nodiscard]] std::string to_text() const;

private:
    std::vector<Point> points_;
};

[[nodiscard]] double mask_spectrum(const PhaseNoiseMask& mask, double offset);
/// Linear SSB level L (1/Hz); zero offset is treated as the lowest mask point.
[[nodiscard]] double mask_linear(const PhaseNoiseMask& mask, double offset);

/// Second-order statistics of the upper (f = h f_p + df) and lower (image at -h f_p + df)
/// sidebands around one carrier harmonic. carrier_phase is the phase reference phi used by
/// the estimator; for a carrier phasor V_p e^{j theta} it equals -theta.
struct SidebandCorrelation {
    double upper_power = 0.0;  // <v_u v_u*>
    double lower_power = 0.0;  // <v_l v_l*>
    std::complex<double> cross{};  // <v_u v_l*>
    double carrier_amplitude = 0.0;
    double carrier_phase = 0.0;
};

/// Pure phase noise of level L(df) on a carrier: equal anticorrelated sidebands.
[[nodiscard]] SidebandCorrelation mask_to_input_sidebands(const PhaseNoiseMask& mask,
                                                          double carrier_amplitude, double offset,
                                                          double carrier_phase = 0.0);

[[nodiscard]] double compute_S_phi(const SidebandCorrelation& s);
[[nodiscard]] double compute_S_a(const SidebandCorrelation& s);
/// 10 log10(S_phi / 2); -infinity when S_phi is zero.
[[nodiscard]] double ssb_phase_noise(const SidebandCorrelation& s);

inline constexpr double kBelowFloor = -std::numeric_limits<double>::infinity();

/// Sideband covariance (2K+1)^2 of a carrier A cos(2 pi f_p t + theta) phase modulated by
/// noise shaped to `mask` and band-limited below f_p, over sidebands m f_p + offset,
/// m = -K..K. Sidebands mirrored about the carrier are correlated. The estimator returns
/// S_phi = 2 L at the fundamental for offsets below f_p.
[[nodiscard]] std::vector<std::complex<double>> pm_source_covariance(
    const PhaseNoiseMask& mask, double amplitude, double theta, double fundamental,
    int num_harmonics, double offset);

struct NoiseOptions {
    bool include_thermal = false;  // Johnson noise of both terminations
    double temperature = 0.02;     // K, used when include_thermal is set
};

/// Sideband correlations at selected nodes and carrier harmonics h = 1..K.
class SidebandNoiseState {
public:
    SidebandNoiseState(double offset, std::vector<std::size_t> nodes, int num_harmonics);

    [[nodiscard]] double offset() const noexcept { return offset_; }
    [[nodiscard]] const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] int num_harmonics() const noexcept { return k_; }
    [[nodiscard]] SidebandCorrelation& at(std::size_t slot, int h);
    [[nodiscard]] const SidebandCorrelation& at(std::size_t slot, int h) const;
    [[nodiscard]] const SidebandCorrelation& at_node(std::size_t node, int h) const;

private:
    double offset_;
    std::vector<std::size_t> nodes_;
    int k_;
    std::vector<SidebandCorrelation> data_;
};

/// Congruence transform Z Sigma Z^H of the input-node source covariance through the
/// conversion matrix, read out around every retained harmonic at every retained node.
[[nodiscard]] SidebandNoiseState propagate_sidebands(
    const HarmonicState& state, const ConversionMatrix& cm,
    std::span<const std::complex<double>> source_covariance);

/// Pump phase noise shaped to `mask` on the Norton pump source, propagated to `nodes`.
[[nodiscard]] SidebandNoiseState propagate_pump_phase_noise(const HarmonicState& state,
                                                            const PhaseNoiseMask& mask,
                                                            double offset,
                                                            std::span<const std::size_t> nodes,
                                                            const NoiseOptions& opts = {});

/// SSB phase noise (dBc/Hz) at the pump fundamental for each node, over an offset grid.
/// Offsets are evaluated in parallel; results are ordered as the inputs.
struct NodeSpectrum {
    std::size_t node;
    std::vector<double> ssb_dbc;
};
[[nodiscard]] std::vector<NodeSpectrum> phase_noise_spectra(const HarmonicState& state,
                                                            const PhaseNoiseMask& mask,
                                                            std::span<const double> offsets,
                                                            std::span<const std::size_t> nodes,
                                                            const NoiseOptions& opts = {});

/// SSB spectrum of the pump source itself, as the estimator sees it at the fundamental.
[[nodiscard]] std::vector<double> source_phase_noise(const PhaseNoiseMask& mask,
                                                     double fundamental, int num_harmonics,
                                                     std::span<const double> offsets);

/// Logarithmic grid with `per_decade` points per decade, inclusive of both ends.
[[nodiscard]] std::vector<double> log_offset_grid(double start, double stop, int per_decade);

}  // namespace twpa
