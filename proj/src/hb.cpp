#include "twpa/hb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "twpa/hb_kernels.hpp"

namespace twpa {

namespace {

constexpr double kPhaseScale = kFluxQuantum / (2.0 * kPi);  // node phase (rad) -> flux (Wb)

double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x * x;
    }
    return std::sqrt(acc);
}

}  // namespace

void HarmonicBasis::validate() const {
    if (!(fundamental > 0.0)) {
        throw std::invalid_argument("harmonic basis needs a positive fundamental");
    }
    if (num_harmonics < 3) {
        throw std::invalid_argument("harmonic basis needs K >= 3");
    }
    if (time_samples < 4 * num_harmonics + 1) {
        throw std::invalid_argument("time grid must have at least 4K+1 samples");
    }
}

// HarmonicState

HarmonicState::HarmonicState(LadderNetwork net, HarmonicBasis basis, double norton_amplitude,
                             std::vector<double> coefficients)
    : net_(std::move(net)),
      basis_(basis),
      norton_amplitude_(norton_amplitude),
      coeffs_(std::move(coefficients)) {
    if (coeffs_.size() != net_.num_nodes() * static_cast<std::size_t>(basis_.coeffs_per_node())) {
        throw std::invalid_argument("coefficient vector does not match network and basis");
    }
}

cplx HarmonicState::node_phase(std::size_t node, int h) const {
    const std::size_t base = node * basis_.coeffs_per_node();
    if (h == 0) {
        return {coeffs_.at(base), 0.0};
    }
    return {coeffs_.at(base + cos_index(h)), -coeffs_.at(base + sin_index(h))};
}

cplx HarmonicState::node_voltage(std::size_t node, int h) const {
    const double w = 2.0 * kPi * h * basis_.fundamental;
    return cplx(0.0, kPhaseScale * w) * node_phase(node, h);
}

cplx HarmonicState::junction_phase(std::size_t cell, int h) const {
    return node_phase(cell, h) - node_phase(cell + 1, h);
}

cplx HarmonicState::junction_current(std::size_t cell, int h) const {
    const int k = basis_.num_harmonics;
    const int m = basis_.time_samples;
    const double ic = net_.cell(cell).junction.critical_current();
    cplx acc{};
    for (int s = 0; s < m; ++s) {
        const double t = 2.0 * kPi * s / m;
        double th = junction_phase(cell, 0).real();
        for (int q = 1; q <= k; ++q) {
            th += (junction_phase(cell, q) * std::exp(cplx(0.0, q * t))).real();
        }
        acc += ic * std::sin(th) * std::exp(cplx(0.0, -h * t));
    }
    return (h == 0 ? 1.0 : 2.0) * acc / double(m);
}

double HarmonicState::max_junction_phase() const {
    kernels::TimeGrid grid(basis_.num_harmonics, basis_.time_samples);
    kernels::JunctionEval eval;
    kernels::evaluate_junctions(net_, grid, coeffs_, eval);
    return *std::max_element(eval.peak_phase.begin(), eval.peak_phase.end());
}

// HbSystem

namespace {

struct SystemScratch {
    kernels::JunctionEval eval;
    std::vector<double> blocks;
};

double reference_current(const LadderNetwork& net) { return net.min_critical_current(); }

}  // namespace

HbSystem::HbSystem(const LadderNetwork& net, HarmonicBasis basis, double norton_amplitude)
    : net_(net), basis_(basis), norton_amplitude_(norton_amplitude) {
    basis_.validate();
}

std::size_t HbSystem::size() const noexcept {
    return net_.num_nodes() * static_cast<std::size_t>(basis_.coeffs_per_node());
}

std::size_t HbSystem::bandwidth() const noexcept {
    return 2 * static_cast<std::size_t>(basis_.coeffs_per_node()) - 1;
}

void HbSystem::add_linear_terms(std::span<const double> x, std::span<double> r) const {
    const int k = basis_.num_harmonics;
    const std::size_t rr = basis_.coeffs_per_node();
    const std::size_t last = net_.size();
    const double w = 2.0 * kPi * basis_.fundamental;
    const double gs = 1.0 / net_.source_impedance();
    const double gl = 1.0 / net_.load_impedance();

    for (std::size_t n = 0; n <= last; ++n) {
        const std::size_t base = n * rr;
        for (int h = 1; h <= k; ++h) {
            const double wh = h * w;
            const double a = x[base + cos_index(h)];
            const double b = x[base + sin_index(h)];
            if (n >= 1) {
                const double c = net_.cell(n - 1).shunt_capacitance;
                r[base + cos_index(h)] -= c * kPhaseScale * wh * wh * a;
                r[base + sin_index(h)] -= c * kPhaseScale * wh * wh * b;
            }
            double g = 0.0;
            if (n == 0) {
                g += gs;
            }
            if (n == last) {
                g += gl;
            }
            if (g != 0.0) {
                r[base + cos_index(h)] += g * kPhaseScale * wh * b;
                r[base + sin_index(h)] -= g * kPhaseScale * wh * a;
            }
        }
    }
    r[cos_index(1)] -= norton_amplitude_;
    r[0] -= net_.dc_bias_current();
}

void HbSystem::residual(std::span<const double> x, std::span<double> r) const {
    const int k = basis_.num_harmonics;
    const std::size_t rr = basis_.coeffs_per_node();
    const std::size_t last = net_.size();
    kernels::TimeGrid grid(k, basis_.time_samples);
    kernels::JunctionEval eval;
    kernels::evaluate_junctions(net_, grid, x, eval);

    std::fill(r.begin(), r.end(), 0.0);
    for (std::size_t j = 0; j < net_.size(); ++j) {
        for (std::size_t i = 0; i < rr; ++i) {
            r[j * rr + i] += eval.current[j * rr + i];
            r[(j + 1) * rr + i] -= eval.current[j * rr + i];
        }
    }
    add_linear_terms(x, r);

    const double iref = reference_current(net_);
    // The bias return at the load pins the DC flux of the output node.
    r[last * rr] = iref * x[last * rr];
    if (!basis_.include_even) {
        for (std::size_t n = 0; n <= last; ++n) {
            for (int h = 2; h <= k; h += 2) {
                r[n * rr + cos_index(h)] = iref * x[n * rr + cos_index(h)];
                r[n * rr + sin_index(h)] = iref * x[n * rr + sin_index(h)];
            }
        }
    }
}

void HbSystem::jacobian(std::span<const double> x, BandedMatrix<double>& jac) const {
    const int k = basis_.num_harmonics;
    const std::size_t rr = basis_.coeffs_per_node();
    const std::size_t nj = net_.size();
    const std::size_t last = nj;
    kernels::TimeGrid grid(k, basis_.time_samples);
    kernels::JunctionEval eval;
    kernels::evaluate_junctions(net_, grid, x, eval);

    std::vector<double> blocks(nj * rr * rr);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(nj); ++j) {
        const auto ju = static_cast<std::size_t>(j);
        kernels::junction_jacobian_block(
            std::span<const cplx>(&eval.gamma[ju * rr], rr), k,
            std::span<double>(&blocks[ju * rr * rr], rr * rr));
    }

    jac.set_zero();
    for (std::size_t j = 0; j < nj; ++j) {
        const double* blk = &blocks[j * rr * rr];
        const std::size_t a = j * rr;
        const std::size_t b = (j + 1) * rr;
        for (std::size_t p = 0; p < rr; ++p) {
            for (std::size_t q = 0; q < rr; ++q) {
                const double v = blk[p * rr + q];
                jac(a + p, a + q) += v;
                jac(a + p, b + q) -= v;
                jac(b + p, a + q) -= v;
                jac(b + p, b + q) += v;
            }
        }
    }

    const double w = 2.0 * kPi * basis_.fundamental;
    const double gs = 1.0 / net_.source_impedance();
    const double gl = 1.0 / net_.load_impedance();
    for (std::size_t n = 0; n <= last; ++n) {
        const std::size_t base = n * rr;
        for (int h = 1; h <= k; ++h) {
            const double wh = h * w;
            const std::size_t ic = base + cos_index(h);
            const std::size_t is = base + sin_index(h);
            if (n >= 1) {
                const double c = net_.cell(n - 1).shunt_capacitance;
                jac(ic, ic) -= c * kPhaseScale * wh * wh;
                jac(is, is) -= c * kPhaseScale * wh * wh;
            }
            double g = 0.0;
            if (n == 0) {
                g += gs;
            }
            if (n == last) {
                g += gl;
            }
            if (g != 0.0) {
                jac(ic, is) += g * kPhaseScale * wh;
                jac(is, ic) -= g * kPhaseScale * wh;
            }
        }
    }

    const double iref = reference_current(net_);
    auto pin_row = [&](std::size_t row) {
        const std::size_t n = jac.size();
        const std::size_t j0 = row > jac.lower() ? row - jac.lower() : 0;
        const std::size_t j1 = std::min(n - 1, row + jac.upper());
        for (std::size_t col = j0; col <= j1; ++col) {
            jac(row, col) = 0.0;
        }
        jac(row, row) = iref;
    };
    pin_row(last * rr);
    if (!basis_.include_even) {
        for (std::size_t n = 0; n <= last; ++n) {
            for (int h = 2; h <= k; h += 2) {
                pin_row(n * rr + cos_index(h));
                pin_row(n * rr + sin_index(h));
            }
        }
    }
}

double HbSystem::residual_max(std::span<const double> r) const {
    const int k = basis_.num_harmonics;
    const std::size_t rr = basis_.coeffs_per_node();
    double worst = 0.0;
    for (std::size_t n = 0; n < net_.num_nodes(); ++n) {
        worst = std::max(worst, std::abs(r[n * rr]));
        for (int h = 1; h <= k; ++h) {
            worst = std::max(worst, std::hypot(r[n * rr + cos_index(h)], r[n * rr + sin_index(h)]));
        }
    }
    return worst;
}

std::vector<double> HbSystem::linear_initial_guess() const {
    const std::size_t rr = basis_.coeffs_per_node();
    const std::size_t nj = net_.size();
    const std::size_t nn = net_.num_nodes();
    std::vector<double> x(nn * rr, 0.0);

    std::vector<double> theta0(nj);
    std::vector<double> gamma0(nj);
    for (std::size_t j = 0; j < nj; ++j) {
        const double ic = net_.cell(j).junction.critical_current();
        theta0[j] = std::asin(net_.dc_bias_current() / ic);
        gamma0[j] = ic * std::cos(theta0[j]);
    }
    double acc = 0.0;
    for (std::size_t n = nn; n-- > 0;) {
        x[n * rr] = acc;
        if (n > 0) {
            acc += theta0[n - 1];
        }
    }

    if (norton_amplitude_ == 0.0) {
        return x;
    }
    const double w = 2.0 * kPi * basis_.fundamental;
    BandedMatrix<cplx> a(nn, 1, 1);
    for (std::size_t j = 0; j < nj; ++j) {
        a(j, j) += gamma0[j];
        a(j + 1, j + 1) += gamma0[j];
        a(j, j + 1) -= gamma0[j];
        a(j + 1, j) -= gamma0[j];
    }
    for (std::size_t n = 1; n < nn; ++n) {
        a(n, n) -= net_.cell(n - 1).shunt_capacitance * kPhaseScale * w * w;
    }
    a(0, 0) += cplx(0.0, kPhaseScale * w / net_.source_impedance());
    a(nj, nj) += cplx(0.0, kPhaseScale * w / net_.load_impedance());
    std::vector<cplx> rhs(nn, cplx{});
    rhs[0] = norton_amplitude_;
    a.factorize();
    a.solve(rhs);
    for (std::size_t n = 0; n < nn; ++n) {
        x[n * rr + cos_index(1)] = rhs[n].real();
        x[n * rr + sin_index(1)] = -rhs[n].imag();
    }
    return x;
}

// Newton with backtracking on the residual 2-norm

namespace {

struct NewtonOutcome {
    bool converged = false;
    int iterations = 0;
    double residual = std::numeric_limits<double>::infinity();
    std::string reason;
};

double peak_phase(const LadderNetwork& net, const HarmonicBasis& basis,
                  std::span<const double> x) {
    kernels::TimeGrid grid(basis.num_harmonics, basis.time_samples);
    kernels::JunctionEval eval;
    kernels::evaluate_junctions(net, grid, x, eval);
    return *std::max_element(eval.peak_phase.begin(), eval.peak_phase.end());
}

NewtonOutcome newton(const HbSystem& sys, const LadderNetwork& net, const HarmonicBasis& basis,
                     std::vector<double>& x, const SolverOptions& opts) {
    NewtonOutcome out;
    const std::size_t n = sys.size();
    std::vector<double> r(n);
    std::vector<double> rt(n);
    std::vector<double> xt(n);
    std::vector<double> dx(n);
    BandedMatrix<double> jac(n, sys.bandwidth(), sys.bandwidth());

    sys.residual(x, r);
    out.residual = sys.residual_max(r);
    bool polished = false;
    while (out.iterations < opts.max_newton_iterations) {
        if (out.residual < opts.tol_abs && (polished || out.iterations == 0)) {
            out.converged = true;
            break;
        }
        if (out.residual < opts.tol_abs) {
            polished = true;
        }
        ++out.iterations;
        try {
            sys.jacobian(x, jac);
            jac.factorize();
        } catch (const SingularMatrixError& e) {
            out.reason = e.what();
            return out;
        }
        for (std::size_t i = 0; i < n; ++i) {
            dx[i] = -r[i];
        }
        jac.solve(dx);

        const double base = norm2(r);
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls <= opts.max_line_search_halvings; ++ls) {
            for (std::size_t i = 0; i < n; ++i) {
                xt[i] = x[i] + alpha * dx[i];
            }
            sys.residual(xt, rt);
            const double trial = norm2(rt);
            if (std::isfinite(trial) && (trial < (1.0 - 1e-4 * alpha) * base || trial == 0.0)) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (out.residual < opts.tol_abs) {
                // already converged; the polishing step hit the rounding floor
                out.converged = true;
                break;
            }
            out.reason = "line search stalled";
            return out;
        }
        x.swap(xt);
        r.swap(rt);
        out.residual = sys.residual_max(r);
    }
    if (!out.converged && out.residual < opts.tol_abs) {
        out.converged = true;
    }
    if (!out.converged) {
        out.reason = "Newton iteration limit reached";
        return out;
    }
    if (peak_phase(net, basis, x) >= kPi / 2) {
        out.converged = false;
        out.reason = "junction driven past critical current";
    }
    return out;
}

void scale_ac(std::vector<double>& x, std::size_t rr, double factor) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i % rr != 0) {
            x[i] *= factor;
        }
    }
}

/// Source stepping from a converged point at amplitude a_from to a_to.
std::vector<double> continue_to(HbSystem& sys, const LadderNetwork& net,
                                const HarmonicBasis& basis, std::vector<double> x_ok,
                                double a_from, double a_to, const SolverOptions& opts,
                                int& total_iterations, double& final_residual) {
    const std::size_t rr = basis.coeffs_per_node();
    double lam_ok = 0.0;
    double step = 0.25;
    int steps = 0;
    std::string last_reason;
    while (lam_ok < 1.0) {
        if (++steps > opts.max_continuation_steps) {
            break;
        }
        const double lam = std::min(1.0, lam_ok + step);
        const double a_ok = a_from + lam_ok * (a_to - a_from);
        const double a_try = a_from + lam * (a_to - a_from);
        std::vector<double> x = x_ok;
        if (a_ok != 0.0) {
            scale_ac(x, rr, a_try / a_ok);
        } else {
            sys.set_norton_amplitude(a_try);
            x = sys.linear_initial_guess();
        }
        sys.set_norton_amplitude(a_try);
        const NewtonOutcome res = newton(sys, net, basis, x, opts);
        total_iterations += res.iterations;
        if (res.converged) {
            x_ok = std::move(x);
            lam_ok = lam;
            final_residual = res.residual;
            step *= 1.5;
        } else {
            last_reason = res.reason;
            step *= 0.5;
            if (step < opts.min_continuation_step) {
                break;
            }
        }
    }
    if (lam_ok < 1.0) {
        const double reached = a_from + lam_ok * (a_to - a_from);
        std::ostringstream msg;
        msg << "harmonic balance did not converge at pump amplitude " << a_to
            << " A (last converged " << reached << " A";
        if (!last_reason.empty()) {
            msg << ", " << last_reason;
        }
        msg << ")";
        throw SolverFailure(msg.str(), reached);
    }
    return x_ok;
}

}  // namespace

HarmonicState solve_steady_state(const LadderNetwork& net, double norton_amplitude,
                                 const HarmonicBasis& basis, const SolverOptions& opts) {
    HbSystem sys(net, basis, norton_amplitude);
    std::vector<double> x = sys.linear_initial_guess();
    NewtonOutcome res = newton(sys, net, basis, x, opts);
    int iterations = res.iterations;
    double residual = res.residual;
    if (!res.converged) {
        sys.set_norton_amplitude(0.0);
        std::vector<double> x_dc = sys.linear_initial_guess();
        x = continue_to(sys, net, basis, std::move(x_dc), 0.0, norton_amplitude, opts,
                        iterations, residual);
    }
    HarmonicState state(net, basis, norton_amplitude, std::move(x));
    state.set_diagnostics(residual, iterations);
    return state;
}

HarmonicState solve_steady_state(const LadderNetwork& net, const DriveSpec& drive,
                                 const HarmonicBasis& basis, const SolverOptions& opts) {
    drive.validate();
    HarmonicBasis b = basis;
    b.fundamental = drive.pump_frequency;
    return solve_steady_state(net, drive.norton_pump_amplitude(net.source_impedance()), b, opts);
}

SweepResult continuation_sweep(const LadderNetwork& net, const HarmonicBasis& basis,
                               std::span<const double> levels, const SolverOptions& opts) {
    for (std::size_t i = 1; i < levels.size(); ++i) {
        if (!(levels[i] > levels[i - 1])) {
            throw std::invalid_argument("pump levels must be strictly ascending");
        }
    }
    SweepResult out;
    const std::size_t rr = basis.coeffs_per_node();
    for (double level : levels) {
        try {
            if (out.states.empty()) {
                out.states.push_back(solve_steady_state(net, level, basis, opts));
            } else {
                const HarmonicState& prev = out.states.back();
                HbSystem sys(net, basis, level);
                std::vector<double> x(prev.coefficients().begin(), prev.coefficients().end());
                if (prev.norton_amplitude() != 0.0) {
                    scale_ac(x, rr, level / prev.norton_amplitude());
                } else {
                    x = sys.linear_initial_guess();
                }
                NewtonOutcome res = newton(sys, net, basis, x, opts);
                int iterations = res.iterations;
                double residual = res.residual;
                if (!res.converged) {
                    std::vector<double> x_prev(prev.coefficients().begin(),
                                               prev.coefficients().end());
                    x = continue_to(sys, net, basis, std::move(x_prev), prev.norton_amplitude(),
                                    level, opts, iterations, residual);
                }
                HarmonicState state(net, basis, level, std::move(x));
                state.set_diagnostics(residual, iterations);
                out.states.push_back(std::move(state));
            }
            out.last_converged_amplitude = level;
        } catch (const SolverFailure& e) {
            out.failure = e.what();
            out.last_converged_amplitude = std::max(out.last_converged_amplitude,
                                                    e.last_converged_amplitude());
            break;
        }
    }
    return out;
}

double PowerBalance::relative_error() const {
    const double scale = std::max(std::abs(source_power), source_resistor + load_resistor);
    if (scale == 0.0) {
        return 0.0;
    }
    return std::abs(source_power - source_resistor - load_resistor) / scale;
}

PowerBalance power_balance(const HarmonicState& state) {
    const auto& net = state.network();
    const int k = state.basis().num_harmonics;
    const std::size_t last = net.size();
    PowerBalance pb;
    pb.source_power = 0.5 * state.norton_amplitude() * state.node_voltage(0, 1).real();
    for (int h = 1; h <= k; ++h) {
        pb.source_resistor += 0.5 * std::norm(state.node_voltage(0, h)) / net.source_impedance();
        pb.load_resistor += 0.5 * std::norm(state.node_voltage(last, h)) / net.load_impedance();
    }
    return pb;
}

}  // namespace twpa
