#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "twpa/noise.hpp"

namespace twpa {

/// y = a0 + a1 x + a2 x^2 + a3 x^3 + a4 x^4
struct PolynomialAmp {
    std::array<double, 5> a{0.0, 1.0, 0.0, 0.0, 0.0};

    static PolynomialAmp odd_only(double a1 = 1.0, double a3 = 1.0) { return {{0.0, a1, 0.0, a3, 0.0}}; }
    static PolynomialAmp all_ones() { return {{1.0, 1.0, 1.0, 1.0, 1.0}}; }

    [[nodiscard]] double operator()(double x) const noexcept;
    [[nodiscard]] double derivative(double x) const noexcept;
    void validate() const;
};

struct Carrier {
    double amplitude = 0.0;  // peak, input units
    double frequency = 0.0;  // Hz
};

inline constexpr int kPolyDegree = 4;

/// First-order transfer of input sidebands through the polynomial driven by a carrier.
/// coupling(d) is the d-th Fourier coefficient of g(t) = P'(V cos wt); output sideband m picks
/// up coupling(m - m') times input sideband m'. carrier(h) is the h-th Fourier coefficient of
/// P(V cos wt) (two-sided, so the output fundamental has peak 2|carrier(1)|).
class SidebandTransfer {
public:
    SidebandTransfer(std::array<double, 2 * kPolyDegree + 1> coupling,
                     std::array<double, 2 * kPolyDegree + 1> carrier, double fundamental,
                     double offset);

    [[nodiscard]] double coupling(int d) const;
    [[nodiscard]] double carrier(int h) const;
    [[nodiscard]] double fundamental() const noexcept { return fundamental_; }
    [[nodiscard]] double offset() const noexcept { return offset_; }

private:
    std::array<double, 2 * kPolyDegree + 1> coupling_;
    std::array<double, 2 * kPolyDegree + 1> carrier_;
    double fundamental_;
    double offset_;
};

[[nodiscard]] SidebandTransfer poly_sideband_transfer(const PolynomialAmp& amp,
                                                      const Carrier& carrier, double offset);

/// Output sideband correlations around the output fundamental.
[[nodiscard]] SidebandCorrelation poly_output_sidebands(const PolynomialAmp& amp,
                                                        const Carrier& carrier,
                                                        const PhaseNoiseMask& mask, double offset);

[[nodiscard]] std::vector<double> poly_output_phase_noise(const PolynomialAmp& amp,
                                                          const Carrier& carrier,
                                                          const PhaseNoiseMask& mask,
                                                          std::span<const double> offsets);

/// SSB spectrum of the noisy carrier before the amplifier, through the same estimator.
[[nodiscard]] std::vector<double> poly_input_phase_noise(const Carrier& carrier,
                                                         const PhaseNoiseMask& mask,
                                                         std::span<const double> offsets);

struct CycloReplica {
    int harmonic;
    double center_frequency;
    double weight;  // h^2 |C_h|^2 / |C_1|^2
    std::vector<double> contribution_dbc;
};

struct CycloOverlapReport {
    std::vector<double> offsets;
    std::vector<CycloReplica> replicas;  // h = 0..4
    std::vector<int> dominant;           // strongest replica other than the fundamental, per offset; 0 if none
    std::vector<double> total_dbc;       // closed-form output, for reference

    [[nodiscard]] const CycloReplica& replica(int h) const { return replicas.at(static_cast<std::size_t>(h)); }
};

[[nodiscard]] CycloOverlapReport cyclo_overlap_report(const PolynomialAmp& amp,
                                                      const Carrier& carrier,
                                                      const PhaseNoiseMask& mask,
                                                      std::span<const double> offsets);

// Monte-Carlo

struct MonteCarloOptions {
    std::uint64_t seed = 1;
    double sample_rate = 0.0;          // Hz; 0 selects 20 f_p
    std::size_t segment_length = 1 << 14;
    std::size_t segments = 128;        // Welch segments per run, 50 % overlap
    int runs = 4;
    double band_fraction = 0.1;        // band half-width for averaging, in decades
};

struct MonteCarloSpectrum {
    std::vector<double> offsets;
    std::vector<double> ssb_dbc;
    std::vector<double> ci_half_width_db;  // ~95 %
    std::vector<std::size_t> bins;         // Welch bins averaged per offset
    double duration = 0.0;                 // s, per run
    double lowest_resolved = 0.0;          // Hz
};

class MonteCarloConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Brute-force estimate: synthesises V cos(wt + phi_n) with phi_n shaped to `mask`, applies the
/// polynomial, demodulates at the carrier and Welch-averages the phase. Offsets below the
/// resolved range or above f_p/2 are rejected.
[[nodiscard]] MonteCarloSpectrum monte_carlo_phase_noise(const PolynomialAmp& amp,
                                                         const Carrier& carrier,
                                                         const PhaseNoiseMask& mask,
                                                         std::span<const double> offsets,
                                                         const MonteCarloOptions& opts);

}  // namespace twpa
