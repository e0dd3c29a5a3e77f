#pragma once

// Per-junction harmonic-balance kernels. The OpenMP versions are used by the solver; the
// *_serial versions are straightforward reference evaluations kept for tests and benchmarks.

#include <complex>
#include <span>
#include <vector>

#include "twpa/circuit.hpp"

namespace twpa::kernels {

/// Uniform sampling of one pump period with cached trig tables for harmonics 0..2K.
class TimeGrid {
public:
    TimeGrid(int num_harmonics, int samples);

    [[nodiscard]] int num_harmonics() const noexcept { return k_; }
    [[nodiscard]] int samples() const noexcept { return m_; }
    [[nodiscard]] double cos_at(int h, int s) const noexcept { return cos_[h * m_ + s]; }
    [[nodiscard]] double sin_at(int h, int s) const noexcept { return sin_[h * m_ + s]; }

private:
    int k_;
    int m_;
    std::vector<double> cos_;
    std::vector<double> sin_;
};

/// Output of one pass over all junctions.
///   current[j*R + i]   real coefficients of I_c sin(theta_j(t))
///   gamma[j*(2K+1)+d]  DFT coefficient d = 0..2K of I_c cos(theta_j(t)) (inverse inductance
///                      times Phi0/2pi); negative d are the conjugates
///   peak_phase[j]      max_t |theta_j(t)|
struct JunctionEval {
    std::vector<double> current;
    std::vector<std::complex<double>> gamma;
    std::vector<double> peak_phase;
};

/// x holds node phase coefficients, node-major with R = 2K+1 entries per node.
void evaluate_junctions(const LadderNetwork& net, const TimeGrid& grid, std::span<const double> x,
                        JunctionEval& out);
void evaluate_junctions_serial(const LadderNetwork& net, int num_harmonics, int samples,
                               std::span<const double> x, JunctionEval& out);

/// Real R x R Jacobian block d(current coefficients)/d(phase coefficients) of one junction,
/// row-major, from its gamma coefficients.
void junction_jacobian_block(std::span<const std::complex<double>> gamma, int num_harmonics,
                             std::span<double> block);

}  // namespace twpa::kernels
