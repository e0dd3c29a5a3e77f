#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <random>
#include <sstream>

#include "twpa/polyamp.hpp"

namespace twpa {

namespace {

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};
template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

FftwBuffer<double> alloc_real(std::size_t n) { return FftwBuffer<double>(fftw_alloc_real(n)); }
FftwBuffer<fftw_complex> alloc_complex(std::size_t n) {
    return FftwBuffer<fftw_complex>(fftw_alloc_complex(n));
}

class Plan {
public:
    explicit Plan(fftw_plan p) : p_(p) {}
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    ~Plan() {
#pragma omp critical(twpa_fftw_planner)
        fftw_destroy_plan(p_);
    }
    void execute() const { fftw_execute(p_); }

private:
    fftw_plan p_;
};

// the FFTW planner is not re-entrant
template <class F>
std::unique_ptr<Plan> make_plan(F&& f) {
    fftw_plan p = nullptr;
#pragma omp critical(twpa_fftw_planner)
    p = f();
    return std::make_unique<Plan>(p);
}

/// One-sided S_phi estimate of a single realisation on the Welch grid.
std::vector<double> one_run(const PolynomialAmp& amp, const Carrier& carrier,
                            const PhaseNoiseMask& mask, const MonteCarloOptions& opts, double fs,
                            std::size_t n, int run) {
    const std::size_t half = n / 2;
    const std::size_t seg = opts.segment_length;

    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                      static_cast<std::uint32_t>(run)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);

    // phase noise with two-sided PSD L(f), band-limited below the carrier
    auto spec = alloc_complex(half + 1);
    auto phi = alloc_real(n);
    for (std::size_t k = 0; k <= half; ++k) {
        const double re = normal(rng);
        const double im = normal(rng);
        double sigma = 0.0;
        if (k > 0 && k < half && k * fs / n < carrier.frequency) {
            sigma = std::sqrt(mask_linear(mask, k * fs / n) * fs / n / 2.0);
        }
        spec[k][0] = sigma * re;
        spec[k][1] = sigma * im;
    }
    const auto synth = make_plan([&] { return fftw_plan_dft_c2r_1d(static_cast<int>(n), spec.get(), phi.get(), FFTW_ESTIMATE); });
    synth->execute();

    // polynomial output, shifted to baseband
    const double cycles_per_sample = carrier.frequency / fs;
    auto z = alloc_complex(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double turn = std::fmod(cycles_per_sample * static_cast<double>(i), 1.0);
        const double wt = 2.0 * kPi * turn;
        const double y = amp(carrier.amplitude * std::cos(wt + phi[i]));
        z[i][0] = y * std::cos(wt);
        z[i][1] = -y * std::sin(wt);
    }
    const auto fwd = make_plan([&] { return fftw_plan_dft_1d(static_cast<int>(n), z.get(), z.get(), FFTW_FORWARD, FFTW_ESTIMATE); });
    const auto inv = make_plan([&] { return fftw_plan_dft_1d(static_cast<int>(n), z.get(), z.get(), FFTW_BACKWARD, FFTW_ESTIMATE); });
    fwd->execute();
    const auto cutoff = static_cast<std::size_t>(std::floor(0.5 * carrier.frequency / fs * n));
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t dist = std::min(k, n - k);
        if (dist > cutoff) {
            z[k][0] = 0.0;
            z[k][1] = 0.0;
        }
    }
    inv->execute();

    std::complex<double> mean{};
    for (std::size_t i = 0; i < n; ++i) {
        mean += std::complex<double>(z[i][0], z[i][1]);
    }
    const std::complex<double> ref = std::conj(mean) / std::abs(mean);
    for (std::size_t i = 0; i < n; ++i) {
        phi[i] = std::arg(std::complex<double>(z[i][0], z[i][1]) * ref);
    }

    // Welch, Hann window, 50 % overlap
    std::vector<double> window(seg);
    double wsum = 0.0;
    for (std::size_t i = 0; i < seg; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / seg);
        wsum += window[i] * window[i];
    }
    auto buf = alloc_real(seg);
    auto out = alloc_complex(seg / 2 + 1);
    const auto welch = make_plan([&] { return fftw_plan_dft_r2c_1d(static_cast<int>(seg), buf.get(), out.get(), FFTW_ESTIMATE); });
    std::vector<double> psd(seg / 2 + 1, 0.0);
    for (std::size_t s = 0; s < opts.segments; ++s) {
        const double* x = phi.get() + s * (seg / 2);
        double m = 0.0;
        for (std::size_t i = 0; i < seg; ++i) {
            m += x[i];
        }
        m /= seg;
        for (std::size_t i = 0; i < seg; ++i) {
            buf[i] = (x[i] - m) * window[i];
        }
        welch->execute();
        for (std::size_t k = 0; k <= seg / 2; ++k) {
            psd[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
        }
    }
    for (double& p : psd) {
        p *= 2.0 / (fs * wsum * opts.segments);
    }
    return psd;
}

}  // namespace

MonteCarloSpectrum monte_carlo_phase_noise(const PolynomialAmp& amp, const Carrier& carrier,
                                           const PhaseNoiseMask& mask,
                                           std::span<const double> offsets,
                                           const MonteCarloOptions& opts) {
    amp.validate();
    if (!(carrier.amplitude > 0.0) || !(carrier.frequency > 0.0)) {
        throw MonteCarloConfigError("Monte-Carlo needs a positive carrier amplitude and frequency");
    }
    const double fs = opts.sample_rate > 0.0 ? opts.sample_rate : 20.0 * carrier.frequency;
    if (!(fs > 4.0 * kPolyDegree * carrier.frequency)) {
        std::ostringstream msg;
        msg << "aliasing guard: sample rate " << fs << " Hz must exceed " << 4 * kPolyDegree
            << " f_p = " << 4.0 * kPolyDegree * carrier.frequency << " Hz";
        throw MonteCarloConfigError(msg.str());
    }
    if (opts.segment_length < 16 || opts.segment_length % 2 != 0) {
        throw MonteCarloConfigError("segment length must be even and at least 16");
    }
    if (opts.segments < 64) {
        throw MonteCarloConfigError("Welch estimate needs at least 64 segments");
    }
    if (opts.runs < 1) {
        throw MonteCarloConfigError("Monte-Carlo needs at least one run");
    }
    if (!(opts.band_fraction > 0.0)) {
        throw MonteCarloConfigError("band fraction must be positive");
    }

    const std::size_t seg = opts.segment_length;
    const std::size_t n = seg / 2 * (opts.segments + 1);
    const double df = fs / seg;

    MonteCarloSpectrum res;
    res.duration = n / fs;
    res.lowest_resolved = std::max(100.0 / res.duration, 2.0 * df);
    for (double f : offsets) {
        if (f < res.lowest_resolved || f > 0.5 * carrier.frequency) {
            std::ostringstream msg;
            msg << "offset " << f << " Hz outside the resolved range [" << res.lowest_resolved
                << ", " << 0.5 * carrier.frequency << "] Hz";
            throw MonteCarloConfigError(msg.str());
        }
    }

    std::vector<std::vector<double>> runs(static_cast<std::size_t>(opts.runs));
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < opts.runs; ++r) {
        try {
            runs[static_cast<std::size_t>(r)] = one_run(amp, carrier, mask, opts, fs, n, r);
        } catch (...) {
#pragma omp critical(twpa_mc_error)
            if (!error) {
                error = std::current_exception();
            }
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    std::vector<double> psd(seg / 2 + 1, 0.0);
    for (const auto& run : runs) {
        for (std::size_t k = 0; k < psd.size(); ++k) {
            psd[k] += run[k] / opts.runs;
        }
    }

    // Hann at 50 % overlap: ~0.95 independent segments each; neighbouring bins share ~1/3
    const double dof_per_bin = 2.0 * opts.segments * opts.runs * 0.947 / 1.5;
    const double ratio = std::pow(10.0, opts.band_fraction);
    for (double f : offsets) {
        const auto lo = static_cast<std::size_t>(std::ceil(f / ratio / df));
        const auto hi = std::min(static_cast<std::size_t>(std::floor(f * ratio / df)), seg / 2 - 1);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t k = std::max<std::size_t>(lo, 1); k <= hi; ++k) {
            sum += psd[k];
            ++count;
        }
        if (count == 0) {
            sum = psd[static_cast<std::size_t>(std::lround(f / df))];
            count = 1;
        }
        const double sphi = sum / count;
        const double rel = 1.96 * std::sqrt(2.0 / (dof_per_bin * count));
        res.offsets.push_back(f);
        res.ssb_dbc.push_back(10.0 * std::log10(sphi / 2.0));
        res.ci_half_width_db.push_back(10.0 * std::log10(1.0 + rel));
        res.bins.push_back(count);
    }
    return res;
}

}  // namespace twpa
