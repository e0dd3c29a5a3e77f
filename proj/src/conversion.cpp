#include "twpa/hb.hpp"

#include <cmath>
#include <exception>
#include <sstream>

#include "twpa/hb_kernels.hpp"

namespace twpa {

namespace {
constexpr double kPhaseScale = kFluxQuantum / (2.0 * kPi);
}

void check_offset(double fundamental, double offset) {
    const double half = 0.5 * fundamental;
    if (offset == 0.0 || std::abs(offset - std::round(offset / half) * half) < 1e-12 * fundamental) {
        std::ostringstream msg;
        msg << "offset " << offset << " Hz collides with a sideband of the " << fundamental
            << " Hz pump grid";
        throw DegenerateOffsetError(msg.str());
    }
}

ConversionMatrix::ConversionMatrix(double fundamental, double offset, int num_harmonics,
                                   std::vector<std::size_t> nodes)
    : fundamental_(fundamental),
      offset_(offset),
      k_(num_harmonics),
      nodes_(std::move(nodes)),
      data_(nodes_.size() * static_cast<std::size_t>((2 * k_ + 1) * (2 * k_ + 1))) {}

std::size_t ConversionMatrix::node_slot(std::size_t node) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i] == node) {
            return i;
        }
    }
    throw std::out_of_range("node not retained in conversion matrix");
}

cplx& ConversionMatrix::transimpedance(std::size_t slot, int m, int m_in) {
    const std::size_t s = 2 * k_ + 1;
    return data_.at(slot * s * s + static_cast<std::size_t>(m + k_) * s +
                    static_cast<std::size_t>(m_in + k_));
}

cplx ConversionMatrix::transimpedance(std::size_t slot, int m, int m_in) const {
    const std::size_t s = 2 * k_ + 1;
    return data_.at(slot * s * s + static_cast<std::size_t>(m + k_) * s +
                    static_cast<std::size_t>(m_in + k_));
}

SidebandSystem::SidebandSystem(const HarmonicState& state, double offset)
    : state_(state),
      offset_(offset),
      k_(state.basis().num_harmonics),
      matrix_(state.network().num_nodes() * (2 * state.basis().num_harmonics + 1),
              2 * (2 * state.basis().num_harmonics + 1) - 1,
              2 * (2 * state.basis().num_harmonics + 1) - 1) {
    const auto& net = state.network();
    const auto& basis = state.basis();
    check_offset(basis.fundamental, offset);

    const std::size_t s = 2 * k_ + 1;
    const std::size_t nj = net.size();
    kernels::TimeGrid grid(k_, basis.time_samples);
    kernels::JunctionEval eval;
    kernels::evaluate_junctions(net, grid, state.coefficients(), eval);

    auto gamma = [&](std::size_t j, int d) {
        const cplx g = eval.gamma[j * s + static_cast<std::size_t>(std::abs(d))];
        return d >= 0 ? g : std::conj(g);
    };

    for (std::size_t j = 0; j < nj; ++j) {
        const std::size_t a = j * s;
        const std::size_t b = (j + 1) * s;
        for (int m = -k_; m <= k_; ++m) {
            for (int mi = -k_; mi <= k_; ++mi) {
                const cplx y = gamma(j, m - mi);
                const std::size_t p = static_cast<std::size_t>(m + k_);
                const std::size_t q = static_cast<std::size_t>(mi + k_);
                matrix_(a + p, a + q) += y;
                matrix_(a + p, b + q) -= y;
                matrix_(b + p, a + q) -= y;
                matrix_(b + p, b + q) += y;
            }
        }
    }
    const double gs = 1.0 / net.source_impedance();
    const double gl = 1.0 / net.load_impedance();
    for (std::size_t n = 0; n <= nj; ++n) {
        for (int m = -k_; m <= k_; ++m) {
            const double w = 2.0 * kPi * (m * basis.fundamental + offset);
            const std::size_t i = n * s + static_cast<std::size_t>(m + k_);
            if (n >= 1) {
                matrix_(i, i) -= net.cell(n - 1).shunt_capacitance * kPhaseScale * w * w;
            }
            if (n == 0) {
                matrix_(i, i) += cplx(0.0, gs * kPhaseScale * w);
            }
            if (n == nj) {
                matrix_(i, i) += cplx(0.0, gl * kPhaseScale * w);
            }
        }
    }
    matrix_.factorize();
}

std::vector<cplx> SidebandSystem::node_voltages(std::size_t node_in,
                                                std::span<const cplx> currents) const {
    const std::size_t s = 2 * k_ + 1;
    const double f0 = state_.basis().fundamental;
    std::vector<cplx> x(matrix_.size(), cplx{});
    for (std::size_t i = 0; i < s; ++i) {
        x[node_in * s + i] = currents[i];
    }
    matrix_.solve(x);
    for (std::size_t n = 0; n * s < x.size(); ++n) {
        for (int m = -k_; m <= k_; ++m) {
            const double w = 2.0 * kPi * (m * f0 + offset_);
            x[n * s + static_cast<std::size_t>(m + k_)] *= cplx(0.0, kPhaseScale * w);
        }
    }
    return x;
}

ConversionMatrix SidebandSystem::transimpedance(std::size_t node_in,
                                                std::span<const std::size_t> nodes) const {
    const std::size_t s = 2 * k_ + 1;
    const std::size_t n = matrix_.size();
    const double f0 = state_.basis().fundamental;
    std::vector<cplx> rhs(n * s, cplx{});
    for (std::size_t c = 0; c < s; ++c) {
        rhs[c * n + node_in * s + c] = 1.0;
    }
    matrix_.solve(rhs, s);

    ConversionMatrix out(f0, offset_, k_, std::vector<std::size_t>(nodes.begin(), nodes.end()));
    for (std::size_t slot = 0; slot < nodes.size(); ++slot) {
        for (int m = -k_; m <= k_; ++m) {
            const double w = 2.0 * kPi * (m * f0 + offset_);
            for (int mi = -k_; mi <= k_; ++mi) {
                const std::size_t col = static_cast<std::size_t>(mi + k_);
                const std::size_t row = nodes[slot] * s + static_cast<std::size_t>(m + k_);
                out.transimpedance(slot, m, mi) = cplx(0.0, kPhaseScale * w) * rhs[col * n + row];
            }
        }
    }
    return out;
}

ConversionMatrix conversion_matrix(const HarmonicState& state, double offset,
                                   std::span<const std::size_t> nodes) {
    std::vector<std::size_t> all;
    if (nodes.empty()) {
        all.resize(state.network().num_nodes());
        for (std::size_t i = 0; i < all.size(); ++i) {
            all[i] = i;
        }
        nodes = all;
    }
    const SidebandSystem sys(state, offset);
    return sys.transimpedance(0, nodes);
}

std::vector<GainPoint> signal_gain(const HarmonicState& state,
                                   std::span<const double> signal_frequencies) {
    const auto& net = state.network();
    const double f0 = state.basis().fundamental;
    const int k = state.basis().num_harmonics;
    const std::size_t last = net.size();
    std::vector<GainPoint> out(signal_frequencies.size());
    std::exception_ptr error;

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(signal_frequencies.size()); ++i) {
        try {
            const double fs = signal_frequencies[static_cast<std::size_t>(i)];
            const long ms = std::lround(fs / f0);
            if (ms > k) {
                throw std::invalid_argument("signal frequency above the retained harmonics");
            }
            const double offset = fs - static_cast<double>(ms) * f0;
            const SidebandSystem sys(state, offset);
            std::vector<cplx> inj(2 * k + 1, cplx{});
            inj[static_cast<std::size_t>(ms + k)] = 1.0;
            const auto v = sys.node_voltages(0, inj);
            const cplx z = v[last * (2 * k + 1) + static_cast<std::size_t>(ms + k)];
            const double g =
                4.0 * std::norm(z) / (net.source_impedance() * net.load_impedance());
            out[static_cast<std::size_t>(i)] = {fs, 10.0 * std::log10(g)};
        } catch (...) {
#pragma omp critical(twpa_gain_error)
            if (!error) {
                error = std::current_exception();
            }
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    return out;
}

std::vector<GainPoint> signal_gain(const LadderNetwork& net, const DriveSpec& drive,
                                   const HarmonicBasis& basis,
                                   std::span<const double> signal_frequencies) {
    const HarmonicState state = solve_steady_state(net, drive, basis);
    return signal_gain(state, signal_frequencies);
}

}  // namespace twpa
