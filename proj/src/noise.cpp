#include "twpa/noise.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace twpa {

void LeesonParams::validate() const {
    if (!(noise_factor > 0.0 && temperature > 0.0 && tone_power > 0.0 && loaded_q > 0.0 &&
          center_frequency > 0.0 && corner_frequency > 0.0)) {
        throw std::invalid_argument("Leeson parameters must all be positive");
    }
}

double leeson_spectrum(const LeesonParams& p, double offset) {
    if (!(offset > 0.0)) {
        throw std::invalid_argument("Leeson offset must be positive");
    }
    const double floor = p.noise_factor * kBoltzmann * p.temperature / (2.0 * p.tone_power);
    const double resonator = p.center_frequency / (2.0 * p.loaded_q * offset);
    return floor * (1.0 + resonator * resonator) * (1.0 + p.corner_frequency / offset);
}

std::vector<double> leeson_spectrum(const LeesonParams& p, std::span<const double> offsets) {
    p.validate();
    std::vector<double> out;
    out.reserve(offsets.size());
    for (double f : offsets) {
        out.push_back(leeson_spectrum(p, f));
    }
    return out;
}

// PhaseNoiseMask

PhaseNoiseMask::PhaseNoiseMask(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.size() < 2) {
        throw std::invalid_argument("phase-noise mask needs at least 2 points");
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!(points_[i].offset > 0.0)) {
            throw std::invalid_argument("phase-noise mask offsets must be positive");
        }
        if (i > 0 && !(points_[i].offset > points_[i - 1].offset)) {
            throw std::invalid_argument("phase-noise mask offsets must be strictly increasing");
        }
    }
}

PhaseNoiseMask PhaseNoiseMask::parse(const std::string& text) {
    std::vector<Point> pts;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream fields(line);
        double f = 0.0;
        double l = 0.0;
        if (!(fields >> f)) {
            continue;  // blank or comment-only
        }
        std::string extra;
        if (!(fields >> l) || (fields >> extra)) {
            throw std::invalid_argument("mask line " + std::to_string(line_no) +
                                        ": expected 'offset_hz level_dbc_per_hz'");
        }
        pts.push_back({f, l});
    }
    return PhaseNoiseMask(std::move(pts));
}

PhaseNoiseMask PhaseNoiseMask::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read mask file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

PhaseNoiseMask PhaseNoiseMask::from_leeson(const LeesonParams& p,
                                           std::span<const double> offsets) {
    std::vector<Point> pts;
    for (double f : offsets) {
        pts.push_back({f, 10.0 * std::log10(leeson_spectrum(p, f) / 2.0)});
    }
    return PhaseNoiseMask(std::move(pts));
}

std::string PhaseNoiseMask::to_text() const {
    std::ostringstream out;
    out << std::setprecision(17);
    for (const auto& p : points_) {
        out << p.offset << ' ' << p.level_dbc << '\n';
    }
    return out.str();
}

double mask_spectrum(const PhaseNoiseMask& mask, double offset) {
    const auto& pts = mask.points();
    if (offset <= pts.front().offset) {
        return pts.front().level_dbc;
    }
    if (offset >= pts.back().offset) {
        return pts.back().level_dbc;
    }
    const auto hi = std::upper_bound(pts.begin(), pts.end(), offset,
                                     [](double f, const auto& p) { return f < p.offset; });
    const auto lo = hi - 1;
    if (offset == lo->offset) {
        return lo->level_dbc;
    }
    const double t = (std::log10(offset) - std::log10(lo->offset)) /
                     (std::log10(hi->offset) - std::log10(lo->offset));
    return lo->level_dbc + t * (hi->level_dbc - lo->level_dbc);
}

double mask_linear(const PhaseNoiseMask& mask, double offset) {
    return std::pow(10.0, mask_spectrum(mask, offset) / 10.0);
}

// Sideband estimators

SidebandCorrelation mask_to_input_sidebands(const PhaseNoiseMask& mask, double carrier_amplitude,
                                            double offset, double carrier_phase) {
    const double p = mask_linear(mask, offset) * carrier_amplitude * carrier_amplitude;
    SidebandCorrelation s;
    s.upper_power = p;
    s.lower_power = p;
    s.cross = -p * std::exp(std::complex<double>(0.0, -2.0 * carrier_phase));
    s.carrier_amplitude = carrier_amplitude;
    s.carrier_phase = carrier_phase;
    return s;
}

namespace {

double rotated_cross(const SidebandCorrelation& s) {
    if (!(s.carrier_amplitude > 0.0)) {
        throw std::domain_error("spectral estimator needs a nonzero carrier");
    }
    return (s.cross * std::exp(std::complex<double>(0.0, 2.0 * s.carrier_phase))).real();
}

}  // namespace

double compute_S_phi(const SidebandCorrelation& s) {
    const double x = rotated_cross(s);
    return (s.upper_power + s.lower_power - 2.0 * x) /
           (2.0 * s.carrier_amplitude * s.carrier_amplitude);
}

double compute_S_a(const SidebandCorrelation& s) {
    const double x = rotated_cross(s);
    return (s.upper_power + s.lower_power + 2.0 * x) /
           (2.0 * s.carrier_amplitude * s.carrier_amplitude);
}

double ssb_phase_noise(const SidebandCorrelation& s) {
    const double sphi = compute_S_phi(s);
    if (sphi <= 0.0) {
        return kBelowFloor;
    }
    return 10.0 * std::log10(sphi / 2.0);
}

// Source covariance

std::vector<std::complex<double>> pm_source_covariance(const PhaseNoiseMask& mask,
                                                       double amplitude, double theta,
                                                       double fundamental, int k,
                                                       double offset) {
    using cplx = std::complex<double>;
    const std::size_t s = 2 * k + 1;
    std::vector<cplx> cov(s * s, cplx{});
    const double a2 = amplitude * amplitude;
    const cplx rot = std::exp(cplx(0.0, 2.0 * theta));
    // the skirt is a real phase process band-limited below the carrier frequency
    auto level = [&](int m_shift) {
        const double nu = std::abs(m_shift * fundamental + offset);
        return nu < fundamental ? mask_linear(mask, nu) : 0.0;
    };
    auto at = [&](int m, int mp) -> cplx& {
        return cov[static_cast<std::size_t>(m + k) * s + static_cast<std::size_t>(mp + k)];
    };
    for (int m = -k; m <= k; ++m) {
        // S_m = (jA/2)[e^{j theta} Phi((m-1) f_p + df) - e^{-j theta} Phi((m+1) f_p + df)]
        at(m, m) += a2 * (level(m - 1) + level(m + 1));
        if (m - 2 >= -k) {
            at(m, m - 2) += -a2 * rot * level(m - 1);
        }
        if (m + 2 <= k) {
            at(m, m + 2) += -a2 * std::conj(rot) * level(m + 1);
        }
    }
    return cov;
}

// SidebandNoiseState

SidebandNoiseState::SidebandNoiseState(double offset, std::vector<std::size_t> nodes, int k)
    : offset_(offset), nodes_(std::move(nodes)), k_(k), data_(nodes_.size() * k) {}

SidebandCorrelation& SidebandNoiseState::at(std::size_t slot, int h) {
    return data_.at(slot * k_ + static_cast<std::size_t>(h - 1));
}

const SidebandCorrelation& SidebandNoiseState::at(std::size_t slot, int h) const {
    return data_.at(slot * k_ + static_cast<std::size_t>(h - 1));
}

const SidebandCorrelation& SidebandNoiseState::at_node(std::size_t node, int h) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i] == node) {
            return at(i, h);
        }
    }
    throw std::out_of_range("node not present in sideband noise state");
}

namespace {

using cplx = std::complex<double>;

/// Adds Z Sigma Z^H restricted to the (u, l) sideband pair of each harmonic.
void accumulate(const HarmonicState& state, const ConversionMatrix& cm,
                std::span<const cplx> cov, SidebandNoiseState& out) {
    const int k = cm.num_harmonics();
    const std::size_t s = 2 * k + 1;
    std::vector<cplx> zu(s);
    std::vector<cplx> zl(s);
    std::vector<cplx> wu(s);
    std::vector<cplx> wl(s);
    for (std::size_t slot = 0; slot < cm.nodes().size(); ++slot) {
        for (int h = 1; h <= k; ++h) {
            for (int mi = -k; mi <= k; ++mi) {
                zu[static_cast<std::size_t>(mi + k)] = cm.transimpedance(slot, h, mi);
                zl[static_cast<std::size_t>(mi + k)] = cm.transimpedance(slot, -h, mi);
            }
            // w = Sigma z^H for both rows
            for (std::size_t a = 0; a < s; ++a) {
                cplx su{};
                cplx sl{};
                for (std::size_t b = 0; b < s; ++b) {
                    su += cov[a * s + b] * std::conj(zu[b]);
                    sl += cov[a * s + b] * std::conj(zl[b]);
                }
                wu[a] = su;
                wl[a] = sl;
            }
            cplx uu{};
            cplx ll{};
            cplx ul{};
            for (std::size_t a = 0; a < s; ++a) {
                uu += zu[a] * wu[a];
                ll += zl[a] * wl[a];
                ul += zu[a] * wl[a];
            }
            auto& c = out.at(slot, h);
            c.upper_power += uu.real();
            c.lower_power += ll.real();
            c.cross += ul;
            const cplx carrier = state.node_voltage(cm.nodes()[slot], h);
            c.carrier_amplitude = std::abs(carrier);
            c.carrier_phase = -std::arg(carrier);
        }
    }
}

std::vector<cplx> thermal_covariance(double conductance, double temperature, int k) {
    const std::size_t s = 2 * k + 1;
    std::vector<cplx> cov(s * s, cplx{});
    // four times the two-sided current PSD, matching pm_source_covariance
    for (std::size_t i = 0; i < s; ++i) {
        cov[i * s + i] = 8.0 * kBoltzmann * temperature * conductance;
    }
    return cov;
}

}  // namespace

SidebandNoiseState propagate_sidebands(const HarmonicState& state, const ConversionMatrix& cm,
                                       std::span<const cplx> source_covariance) {
    SidebandNoiseState out(cm.offset(), cm.nodes(), cm.num_harmonics());
    accumulate(state, cm, source_covariance, out);
    return out;
}

SidebandNoiseState propagate_pump_phase_noise(const HarmonicState& state,
                                              const PhaseNoiseMask& mask, double offset,
                                              std::span<const std::size_t> nodes,
                                              const NoiseOptions& opts) {
    const auto& basis = state.basis();
    const SidebandSystem sys(state, offset);
    const ConversionMatrix cm = sys.transimpedance(0, nodes);
    const auto cov = pm_source_covariance(mask, state.norton_amplitude(), 0.0, basis.fundamental,
                                          basis.num_harmonics, offset);
    SidebandNoiseState out = propagate_sidebands(state, cm, cov);
    if (opts.include_thermal) {
        const auto& net = state.network();
        accumulate(state, cm,
                   thermal_covariance(1.0 / net.source_impedance(), opts.temperature,
                                      basis.num_harmonics),
                   out);
        const ConversionMatrix cm_load = sys.transimpedance(net.size(), nodes);
        accumulate(state, cm_load,
                   thermal_covariance(1.0 / net.load_impedance(), opts.temperature,
                                      basis.num_harmonics),
                   out);
    }
    return out;
}

std::vector<NodeSpectrum> phase_noise_spectra(const HarmonicState& state,
                                              const PhaseNoiseMask& mask,
                                              std::span<const double> offsets,
                                              std::span<const std::size_t> nodes,
                                              const NoiseOptions& opts) {
    std::vector<NodeSpectrum> out;
    for (std::size_t node : nodes) {
        out.push_back({node, std::vector<double>(offsets.size(), 0.0)});
    }
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(offsets.size()); ++i) {
        try {
            const auto iu = static_cast<std::size_t>(i);
            const auto ns = propagate_pump_phase_noise(state, mask, offsets[iu], nodes, opts);
            for (std::size_t slot = 0; slot < nodes.size(); ++slot) {
                out[slot].ssb_dbc[iu] = ssb_phase_noise(ns.at(slot, 1));
            }
        } catch (...) {
#pragma omp critical(twpa_noise_error)
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

std::vector<double> source_phase_noise(const PhaseNoiseMask& mask, double fundamental, int k,
                                       std::span<const double> offsets) {
    std::vector<double> out;
    const std::size_t s = 2 * k + 1;
    for (double df : offsets) {
        const auto cov = pm_source_covariance(mask, 1.0, 0.0, fundamental, k, df);
        SidebandCorrelation c;
        c.upper_power = cov[(k + 1) * s + (k + 1)].real();
        c.lower_power = cov[(k - 1) * s + (k - 1)].real();
        c.cross = cov[(k + 1) * s + (k - 1)];
        c.carrier_amplitude = 1.0;
        c.carrier_phase = 0.0;
        out.push_back(ssb_phase_noise(c));
    }
    return out;
}

std::vector<double> log_offset_grid(double start, double stop, int per_decade) {
    if (!(start > 0.0) || !(stop >= start) || per_decade < 1) {
        throw std::invalid_argument("invalid logarithmic offset grid");
    }
    const double decades = std::log10(stop / start);
    const int n = static_cast<int>(std::lround(decades * per_decade));
    std::vector<double> out;
    for (int i = 0; i <= n; ++i) {
        out.push_back(i == n ? stop : start * std::pow(10.0, static_cast<double>(i) / per_decade));
    }
    return out;
}

}  // namespace twpa
