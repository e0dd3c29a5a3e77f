#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "twpa/banded.hpp"
#include "twpa/circuit.hpp"

namespace twpa {

using cplx = std::complex<double>;

/// Truncated Fourier basis of the pump: harmonics 0..K of `fundamental`, sampled on a
/// uniform time grid for the pointwise nonlinearity.
struct HarmonicBasis {
    double fundamental = 0.0;
    int num_harmonics = 9;
    bool include_even = true;  // diagnostic switch; false pins even harmonics >= 2 to zero
    int time_samples = 64;

    [[nodiscard]] int coeffs_per_node() const noexcept { return 2 * num_harmonics + 1; }
    void validate() const;
};

/// Real coefficient layout per node: [a0, a1, b1, ..., aK, bK] for
/// x(t) = a0 + sum_h a_h cos(h w t) + b_h sin(h w t).
/// Complex peak phasors follow X_h = a_h - j b_h, so x(t) = Re sum X_h e^{j h w t}.
[[nodiscard]] inline std::size_t cos_index(int h) noexcept {
    return h == 0 ? 0 : static_cast<std::size_t>(2 * h - 1);
}
[[nodiscard]] inline std::size_t sin_index(int h) noexcept { return static_cast<std::size_t>(2 * h); }

struct SolverOptions {
    double tol_abs = 1e-12;  // A, per harmonic per node
    int max_newton_iterations = 40;
    int max_line_search_halvings = 12;
    double min_continuation_step = 1.0 / 512.0;
    int max_continuation_steps = 400;
};

/// Raised when Newton plus source stepping cannot reach the requested pump level.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, double last_converged_amplitude)
        : std::runtime_error(what), last_converged_amplitude_(last_converged_amplitude) {}
    [[nodiscard]] double last_converged_amplitude() const noexcept {
        return last_converged_amplitude_;
    }

private:
    double last_converged_amplitude_;
};

class DegenerateOffsetError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Periodic steady state of the pumped ladder. Unknowns are node phases
/// phi_n = 2 pi Phi_n / Phi0 (node flux in units of the reduced flux quantum).
class HarmonicState {
public:
    HarmonicState(LadderNetwork net, HarmonicBasis basis, double norton_amplitude,
                  std::vector<double> coefficients);

    [[nodiscard]] const LadderNetwork& network() const noexcept { return net_; }
    [[nodiscard]] const HarmonicBasis& basis() const noexcept { return basis_; }
    [[nodiscard]] double norton_amplitude() const noexcept { return norton_amplitude_; }
    [[nodiscard]] std::span<const double> coefficients() const noexcept { return coeffs_; }

    /// Peak phasor of the node phase at harmonic h (rad).
    [[nodiscard]] cplx node_phase(std::size_t node, int h) const;
    /// Peak phasor of the node voltage at harmonic h (V); zero at h = 0.
    [[nodiscard]] cplx node_voltage(std::size_t node, int h) const;
    /// Peak phasor of the junction phase of cell k (between nodes k and k+1).
    [[nodiscard]] cplx junction_phase(std::size_t cell, int h) const;
    /// Peak phasor of the junction current of cell k, projected on the harmonic basis.
    [[nodiscard]] cplx junction_current(std::size_t cell, int h) const;

    [[nodiscard]] double residual_norm() const noexcept { return residual_norm_; }
    [[nodiscard]] int newton_iterations() const noexcept { return iterations_; }
    [[nodiscard]] double max_junction_phase() const;

    void set_diagnostics(double residual_norm, int iterations) noexcept {
        residual_norm_ = residual_norm;
        iterations_ = iterations;
    }

private:
    LadderNetwork net_;
    HarmonicBasis basis_;
    double norton_amplitude_;
    std::vector<double> coeffs_;
    double residual_norm_ = 0.0;
    int iterations_ = 0;
};

/// Kirchhoff current residual and Jacobian of the harmonic-balance equations.
class HbSystem {
public:
    HbSystem(const LadderNetwork& net, HarmonicBasis basis, double norton_amplitude);

    [[nodiscard]] std::size_t size() const noexcept;
    [[nodiscard]] std::size_t bandwidth() const noexcept;

    void residual(std::span<const double> x, std::span<double> r) const;
    void jacobian(std::span<const double> x, BandedMatrix<double>& jac) const;
    /// Max over nodes and harmonics of the residual phasor magnitude (A).
    [[nodiscard]] double residual_max(std::span<const double> r) const;

    /// DC operating point plus linear-line response at the pump fundamental.
    [[nodiscard]] std::vector<double> linear_initial_guess() const;

    [[nodiscard]] double norton_amplitude() const noexcept { return norton_amplitude_; }
    void set_norton_amplitude(double a) noexcept { norton_amplitude_ = a; }

private:
    void add_linear_terms(std::span<const double> x, std::span<double> r) const;

    const LadderNetwork& net_;
    HarmonicBasis basis_;
    double norton_amplitude_;
};

[[nodiscard]] HarmonicState solve_steady_state(const LadderNetwork& net, double norton_amplitude,
                                               const HarmonicBasis& basis,
                                               const SolverOptions& opts = {});
[[nodiscard]] HarmonicState solve_steady_state(const LadderNetwork& net, const DriveSpec& drive,
                                               const HarmonicBasis& basis,
                                               const SolverOptions& opts = {});

struct SweepResult {
    std::vector<HarmonicState> states;
    std::optional<std::string> failure;  // set when the sweep aborted early
    double last_converged_amplitude = 0.0;
};

/// Source stepping over ascending Norton amplitudes; each level starts from the previous one.
[[nodiscard]] SweepResult continuation_sweep(const LadderNetwork& net, const HarmonicBasis& basis,
                                             std::span<const double> norton_levels,
                                             const SolverOptions& opts = {});

struct PowerBalance {
    double source_power = 0.0;     // delivered by the Norton pump source (W)
    double source_resistor = 0.0;  // dissipated in the source termination
    double load_resistor = 0.0;    // dissipated in the load termination
    [[nodiscard]] double relative_error() const;
};

[[nodiscard]] PowerBalance power_balance(const HarmonicState& state);

// Small-signal analysis around a steady state

/// Sideband index m runs over -K..K; frequency m f_p + offset.
class ConversionMatrix {
public:
    ConversionMatrix(double fundamental, double offset, int num_harmonics,
                     std::vector<std::size_t> nodes);

    [[nodiscard]] int num_harmonics() const noexcept { return k_; }
    [[nodiscard]] int num_sidebands() const noexcept { return 2 * k_ + 1; }
    [[nodiscard]] double offset() const noexcept { return offset_; }
    [[nodiscard]] double sideband_frequency(int m) const noexcept {
        return m * fundamental_ + offset_;
    }
    [[nodiscard]] const std::vector<std::size_t>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::size_t node_slot(std::size_t node) const;

    /// Voltage phasor at `node`, sideband m, per unit current injected into the input node at
    /// sideband m_in (ohm).
    [[nodiscard]] cplx& transimpedance(std::size_t slot, int m, int m_in);
    [[nodiscard]] cplx transimpedance(std::size_t slot, int m, int m_in) const;

private:
    double fundamental_;
    double offset_;
    int k_;
    std::vector<std::size_t> nodes_;
    std::vector<cplx> data_;
};

/// Factored small-signal system at a single offset. Read-only after construction, so one
/// steady state can feed many of these concurrently.
class SidebandSystem {
public:
    SidebandSystem(const HarmonicState& state, double offset);

    [[nodiscard]] int num_harmonics() const noexcept { return k_; }
    [[nodiscard]] std::size_t size() const noexcept { return matrix_.size(); }

    /// Solves for node voltages given injected sideband currents at node `node_in`.
    /// `currents` has 2K+1 entries indexed m + K; returns (N+1)*(2K+1) voltages.
    [[nodiscard]] std::vector<cplx> node_voltages(std::size_t node_in,
                                                  std::span<const cplx> currents) const;
    [[nodiscard]] ConversionMatrix transimpedance(std::size_t node_in,
                                                  std::span<const std::size_t> nodes) const;

private:
    const HarmonicState& state_;
    double offset_;
    int k_;
    BandedMatrix<cplx> matrix_;
};

void check_offset(double fundamental, double offset);

[[nodiscard]] ConversionMatrix conversion_matrix(const HarmonicState& state, double offset,
                                                 std::span<const std::size_t> nodes = {});

struct GainPoint {
    double frequency;
    double gain_db;
};

[[nodiscard]] std::vector<GainPoint> signal_gain(const HarmonicState& state,
                                                 std::span<const double> signal_frequencies);
[[nodiscard]] std::vector<GainPoint> signal_gain(const LadderNetwork& net, const DriveSpec& drive,
                                                 const HarmonicBasis& basis,
                                                 std::span<const double> signal_frequencies);

}  // namespace twpa
