#include "twpa/hb_kernels.hpp"

#include "twpa/hb.hpp"

#include <algorithm>
#include <cmath>

namespace twpa::kernels {

using cplx = std::complex<double>;

TimeGrid::TimeGrid(int num_harmonics, int samples)
    : k_(num_harmonics),
      m_(samples),
      cos_(static_cast<std::size_t>((2 * num_harmonics + 1) * samples)),
      sin_(cos_.size()) {
    for (int h = 0; h <= 2 * k_; ++h) {
        for (int s = 0; s < m_; ++s) {
            // reduce h*s mod M first so every table entry is an exact grid angle
            const double angle = 2.0 * kPi * static_cast<double>((h * s) % m_) / m_;
            cos_[h * m_ + s] = std::cos(angle);
            sin_[h * m_ + s] = std::sin(angle);
        }
    }
}

namespace {

void resize_output(std::size_t n_junctions, int k, JunctionEval& out) {
    const std::size_t r = 2 * k + 1;
    out.current.assign(n_junctions * r, 0.0);
    out.gamma.assign(n_junctions * r, cplx{});
    out.peak_phase.assign(n_junctions, 0.0);
}

void evaluate_one(const TimeGrid& grid, double ic, const double* left, const double* right,
                  double* current, cplx* gamma, double& peak, std::vector<double>& theta) {
    const int k = grid.num_harmonics();
    const int m = grid.samples();
    const double inv_m = 1.0 / m;

    double peak_abs = 0.0;
    for (int s = 0; s < m; ++s) {
        double th = left[0] - right[0];
        for (int h = 1; h <= k; ++h) {
            th += (left[2 * h - 1] - right[2 * h - 1]) * grid.cos_at(h, s) +
                  (left[2 * h] - right[2 * h]) * grid.sin_at(h, s);
        }
        theta[s] = th;
        peak_abs = std::max(peak_abs, std::abs(th));
    }
    peak = peak_abs;

    for (int i = 0; i < 2 * k + 1; ++i) {
        current[i] = 0.0;
        gamma[i] = 0.0;
    }
    for (int s = 0; s < m; ++s) {
        const double is = ic * std::sin(theta[s]);
        const double gs = ic * std::cos(theta[s]);
        current[0] += is;
        for (int h = 1; h <= k; ++h) {
            current[2 * h - 1] += is * grid.cos_at(h, s);
            current[2 * h] += is * grid.sin_at(h, s);
        }
        for (int d = 0; d <= 2 * k; ++d) {
            gamma[d] += cplx(gs * grid.cos_at(d, s), -gs * grid.sin_at(d, s));
        }
    }
    current[0] *= inv_m;
    for (int i = 1; i < 2 * k + 1; ++i) {
        current[i] *= 2.0 * inv_m;
    }
    for (int d = 0; d <= 2 * k; ++d) {
        gamma[d] *= inv_m;
    }
}

}  // namespace

void evaluate_junctions(const LadderNetwork& net, const TimeGrid& grid, std::span<const double> x,
                        JunctionEval& out) {
    const int k = grid.num_harmonics();
    const std::size_t r = 2 * k + 1;
    const std::size_t nj = net.size();
    resize_output(nj, k, out);

#pragma omp parallel
    {
        std::vector<double> theta(grid.samples());
#pragma omp for schedule(static)
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(nj); ++j) {
            const auto ju = static_cast<std::size_t>(j);
            evaluate_one(grid, net.cell(ju).junction.critical_current(), &x[ju * r],
                         &x[(ju + 1) * r], &out.current[ju * r], &out.gamma[ju * r],
                         out.peak_phase[ju], theta);
        }
    }
}

void evaluate_junctions_serial(const LadderNetwork& net, int k, int samples,
                               std::span<const double> x, JunctionEval& out) {
    const std::size_t r = 2 * k + 1;
    resize_output(net.size(), k, out);
    for (std::size_t j = 0; j < net.size(); ++j) {
        const double ic = net.cell(j).junction.critical_current();
        for (int s = 0; s < samples; ++s) {
            const double t = 2.0 * kPi * s / samples;
            double th = x[j * r] - x[(j + 1) * r];
            for (int h = 1; h <= k; ++h) {
                th += (x[j * r + 2 * h - 1] - x[(j + 1) * r + 2 * h - 1]) * std::cos(h * t);
                th += (x[j * r + 2 * h] - x[(j + 1) * r + 2 * h]) * std::sin(h * t);
            }
            out.peak_phase[j] = std::max(out.peak_phase[j], std::abs(th));
            const double is = ic * std::sin(th);
            const double gs = ic * std::cos(th);
            out.current[j * r] += is / samples;
            for (int h = 1; h <= k; ++h) {
                out.current[j * r + 2 * h - 1] += 2.0 * is * std::cos(h * t) / samples;
                out.current[j * r + 2 * h] += 2.0 * is * std::sin(h * t) / samples;
            }
            for (int d = 0; d <= 2 * k; ++d) {
                out.gamma[j * r + d] += gs * std::exp(cplx(0.0, -d * t)) / double(samples);
            }
        }
    }
}

void junction_jacobian_block(std::span<const cplx> gamma, int k, std::span<double> block) {
    const int r = 2 * k + 1;
    auto g = [&](int d) { return d >= 0 ? gamma[d] : std::conj(gamma[-d]); };

    for (int out_h = 0; out_h <= k; ++out_h) {
        for (int in_h = 0; in_h <= k; ++in_h) {
            // complex derivatives of output harmonic Y_out wrt the real input coefficients
            cplx d_cos;
            cplx d_sin;
            if (in_h == 0) {
                d_cos = g(out_h);
            } else {
                d_cos = 0.5 * (g(out_h - in_h) + g(out_h + in_h));
                d_sin = cplx(0.0, -0.5) * (g(out_h - in_h) - g(out_h + in_h));
            }
            if (out_h == 0) {
                block[0 * r + cos_index(in_h)] = d_cos.real();
                if (in_h > 0) {
                    block[0 * r + sin_index(in_h)] = d_sin.real();
                }
                continue;
            }
            const auto rc = static_cast<std::size_t>(2 * out_h - 1);
            const auto rs = static_cast<std::size_t>(2 * out_h);
            const auto ci = in_h == 0 ? 0 : static_cast<std::size_t>(2 * in_h - 1);
            block[rc * r + ci] = 2.0 * d_cos.real();
            block[rs * r + ci] = -2.0 * d_cos.imag();
            if (in_h > 0) {
                const auto si = static_cast<std::size_t>(2 * in_h);
                block[rc * r + si] = 2.0 * d_sin.real();
                block[rs * r + si] = -2.0 * d_sin.imag();
            }
        }
    }
}

}  // namespace twpa::kernels
