#include "twpa/polyamp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace twpa {

namespace {

constexpr int kK = kPolyDegree;
constexpr std::size_t kS = 2 * kK + 1;
using Coeffs = std::array<double, kS>;

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;
    }
    return r;
}

/// Adds c * cos^n(wt) to a two-sided harmonic series.
void add_cos_power(Coeffs& out, int n, double c) {
    const double scale = c / std::pow(2.0, n);
    for (int k = 0; k <= n; ++k) {
        out[static_cast<std::size_t>(n - 2 * k + kK)] += scale * binomial(n, k);
    }
}

}  // namespace

double PolynomialAmp::operator()(double x) const noexcept {
    return a[0] + x * (a[1] + x * (a[2] + x * (a[3] + x * a[4])));
}

double PolynomialAmp::derivative(double x) const noexcept {
    return a[1] + x * (2.0 * a[2] + x * (3.0 * a[3] + x * 4.0 * a[4]));
}

void PolynomialAmp::validate() const {
    for (double c : a) {
        if (!std::isfinite(c)) {
            throw std::invalid_argument("polynomial coefficients must be finite");
        }
    }
    if (a[1] == 0.0) {
        throw std::invalid_argument("polynomial amplifier needs a nonzero linear gain a1");
    }
}

SidebandTransfer::SidebandTransfer(Coeffs coupling, Coeffs carrier, double fundamental,
                                   double offset)
    : coupling_(coupling), carrier_(carrier), fundamental_(fundamental), offset_(offset) {}

double SidebandTransfer::coupling(int d) const {
    return std::abs(d) > kK ? 0.0 : coupling_[static_cast<std::size_t>(d + kK)];
}

double SidebandTransfer::carrier(int h) const {
    return std::abs(h) > kK ? 0.0 : carrier_[static_cast<std::size_t>(h + kK)];
}

SidebandTransfer poly_sideband_transfer(const PolynomialAmp& amp, const Carrier& carrier,
                                        double offset) {
    if (!(carrier.amplitude >= 0.0)) {
        throw std::invalid_argument("carrier amplitude must be non-negative");
    }
    if (carrier.frequency > 0.0) {
        check_offset(carrier.frequency, offset);
    }
    const double v = carrier.amplitude;
    Coeffs g{};
    Coeffs c{};
    for (int n = 0; n <= kPolyDegree; ++n) {
        add_cos_power(c, n, amp.a[static_cast<std::size_t>(n)] * std::pow(v, n));
        if (n >= 1) {
            add_cos_power(g, n - 1, n * amp.a[static_cast<std::size_t>(n)] * std::pow(v, n - 1));
        }
    }
    return SidebandTransfer(g, c, carrier.frequency, offset);
}

SidebandCorrelation poly_output_sidebands(const PolynomialAmp& amp, const Carrier& carrier,
                                          const PhaseNoiseMask& mask, double offset) {
    const SidebandTransfer t = poly_sideband_transfer(amp, carrier, offset);
    // every input sideband reachable from m = +-1 lies within |m'| <= kK
    const auto cov = pm_source_covariance(mask, carrier.amplitude, 0.0, carrier.frequency, kK, offset);

    auto project = [&](int m) {
        std::array<std::complex<double>, kS> w{};
        for (int a = -kK; a <= kK; ++a) {
            std::complex<double> acc{};
            for (int b = -kK; b <= kK; ++b) {
                acc += cov[static_cast<std::size_t>(a + kK) * kS + static_cast<std::size_t>(b + kK)] *
                       t.coupling(m - b);
            }
            w[static_cast<std::size_t>(a + kK)] = acc;
        }
        return w;
    };
    const auto wu = project(1);
    const auto wl = project(-1);
    std::complex<double> uu{};
    std::complex<double> ll{};
    std::complex<double> ul{};
    for (int a = -kK; a <= kK; ++a) {
        const auto i = static_cast<std::size_t>(a + kK);
        uu += t.coupling(1 - a) * wu[i];
        ll += t.coupling(-1 - a) * wl[i];
        ul += t.coupling(1 - a) * wl[i];
    }
    SidebandCorrelation s;
    s.upper_power = uu.real();
    s.lower_power = ll.real();
    s.cross = ul;
    s.carrier_amplitude = 2.0 * std::abs(t.carrier(1));
    s.carrier_phase = t.carrier(1) < 0.0 ? -kPi : 0.0;
    return s;
}

std::vector<double> poly_output_phase_noise(const PolynomialAmp& amp, const Carrier& carrier,
                                            const PhaseNoiseMask& mask,
                                            std::span<const double> offsets) {
    std::vector<double> out;
    out.reserve(offsets.size());
    for (double df : offsets) {
        out.push_back(ssb_phase_noise(poly_output_sidebands(amp, carrier, mask, df)));
    }
    return out;
}

std::vector<double> poly_input_phase_noise(const Carrier& carrier, const PhaseNoiseMask& mask,
                                           std::span<const double> offsets) {
    return source_phase_noise(mask, carrier.frequency, kK, offsets);
}

CycloOverlapReport cyclo_overlap_report(const PolynomialAmp& amp, const Carrier& carrier,
                                        const PhaseNoiseMask& mask,
                                        std::span<const double> offsets) {
    const SidebandTransfer t = poly_sideband_transfer(amp, carrier, offsets.empty() ? 1.0 : offsets[0]);
    const double c1 = t.carrier(1);
    if (c1 == 0.0) {
        throw std::domain_error("output fundamental vanishes");
    }
    const double f = carrier.frequency;

    CycloOverlapReport rep;
    rep.offsets.assign(offsets.begin(), offsets.end());
    rep.total_dbc = poly_output_phase_noise(amp, carrier, mask, offsets);
    for (int h = 0; h <= kK; ++h) {
        CycloReplica r{h, h * f, h * h * t.carrier(h) * t.carrier(h) / (c1 * c1), {}};
        for (double df : offsets) {
            // skirt of harmonic +-h landing on the upper (f + df) and lower (-f + df) sidebands
            double level = 0.0;
            for (int side : {1, -1}) {
                for (int sign : {1, -1}) {
                    level += mask_linear(mask, std::abs(side * f + df - sign * h * f));
                }
            }
            const double c = 0.5 * r.weight * level;
            r.contribution_dbc.push_back(c > 0.0 ? 10.0 * std::log10(c) : kBelowFloor);
        }
        rep.replicas.push_back(std::move(r));
    }
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        int best = 0;
        double best_level = kBelowFloor;
        for (int h = 0; h <= kK; ++h) {
            const double v = rep.replicas[static_cast<std::size_t>(h)].contribution_dbc[i];
            if (h != 1 && v > best_level) {
                best = h;
                best_level = v;
            }
        }
        rep.dominant.push_back(best);
    }
    return rep;
}

}  // namespace twpa
