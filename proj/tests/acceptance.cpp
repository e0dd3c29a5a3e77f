// One line per acceptance criterion; exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "twpa/hb.hpp"
#include "twpa/noise.hpp"
#include "twpa/polyamp.hpp"

using namespace twpa;

namespace {

constexpr double kIc = 1.4e-6;
constexpr double kC = 93e-15;
constexpr double kFp = 8.03e9;

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;
std::vector<const HarmonicState*> converged;  // for the conservation check

void report(int n, const char* title, const std::function<void(Verdict&)>& body) {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(v);
    } catch (const std::exception& e) {
        v.pass = false;
        v.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) {
        ++failures;
    }
    std::printf("criterion %d %s: %s;%s (%.1f s)\n", n, v.pass ? "PASS" : "FAIL", title, v.detail.str().c_str(), secs);
    std::fflush(stdout);
}

double norton(double dbm) { return 2.0 * power_dbm_to_current_amplitude(dbm, 50.0); }

std::vector<double> sweep_levels() {
    std::vector<double> out;
    for (double p = -100.0; p <= -86.0 + 1e-9; p += 2.0) {
        out.push_back(norton(p));
    }
    return out;
}

PhaseNoiseMask bundled_mask() {
    return PhaseNoiseMask::load(std::string(TWPA_SOURCE_DIR) + "/configs/masks/anapico_representative.mask");
}

// Criterion 1

void eq_exactness(Verdict& v) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const long double pi = 3.14159265358979323846264338327950288L;
    const long double kb = 1.380649e-23L;
    double worst_l = 0.0;
    double worst_s = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double ic = std::pow(10.0, -7.0 + 3.0 * u(rng));
        const double cur = (2.0 * u(rng) - 1.0) * 0.999 * ic;
        const long double l0 = static_cast<long double>(kFluxQuantum) / (2.0L * pi * ic);
        const long double r = static_cast<long double>(cur) / ic;
        const long double l_ref = l0 / std::sqrt(1.0L - r * r);
        const double l = jj_inductance(cur, JosephsonJunction(ic));
        worst_l = std::max(worst_l, static_cast<double>(std::abs(l - l_ref) / l_ref));

        LeesonParams p;
        p.noise_factor = 1.0 + 9.0 * u(rng);
        p.temperature = 1.0 + 400.0 * u(rng);
        p.tone_power = std::pow(10.0, -6.0 + 5.0 * u(rng));
        p.loaded_q = std::pow(10.0, 1.0 + 4.0 * u(rng));
        p.center_frequency = std::pow(10.0, 8.0 + 3.0 * u(rng));
        p.corner_frequency = std::pow(10.0, 2.0 + 4.0 * u(rng));
        const double df = std::pow(10.0, 9.0 * u(rng));
        const long double a = static_cast<long double>(p.center_frequency) / (2.0L * p.loaded_q * df);
        const long double s_ref = static_cast<long double>(p.noise_factor) * kb * p.temperature /
                                  (2.0L * p.tone_power) * (1.0L + a * a) *
                                  (1.0L + static_cast<long double>(p.corner_frequency) / df);
        const double s = leeson_spectrum(p, df);
        worst_s = std::max(worst_s, static_cast<double>(std::abs(s - s_ref) / s_ref));
    }
    v.detail << " worst relative error: inductance " << worst_l << ", Leeson " << worst_s;
    v.require(worst_l < 1e-12, "inductance");
    v.require(worst_s < 1e-12, "Leeson");
}

// Criterion 2

std::vector<HarmonicState> fwm_states;

void fwm_symmetry(Verdict& v) {
    const auto net = LadderNetwork::uniform(200, kIc, kC, 0.0);
    const HarmonicBasis basis{kFp, 9, true, 64};
    fwm_states.push_back(solve_steady_state(net, 1.4e-6, basis));
    const auto& st = fwm_states.back();
    std::vector<double> f;
    for (double d = 0.1e9; d <= 1.0e9 + 1.0; d += 0.05e9) {
        f.push_back(kFp + d);
        f.push_back(kFp - d);
    }
    const auto g = signal_gain(st, f);
    double worst = 0.0;
    double min_gain = 1e9;
    for (std::size_t i = 0; i < g.size(); i += 2) {
        worst = std::max(worst, std::abs(g[i].gain_db - g[i + 1].gain_db));
        min_gain = std::min({min_gain, g[i].gain_db, g[i + 1].gain_db});
    }
    v.detail << " N=200, max |G(fp+d) - G(fp-d)| = " << worst << " dB over d in [0.1, 1] GHz, min gain "
             << min_gain << " dB";
    v.require(worst < 1.0, "asymmetry");
    v.require(min_gain > 0.0, "positive gain");
}

// Criterion 3

void twm_band(Verdict& v) {
    const auto net = LadderNetwork::uniform(1000, kIc, kC, 0.7e-6);
    const HarmonicBasis basis{kFp, 9, true, 64};
    const auto st = solve_steady_state(net, 0.6e-6, basis);
    std::vector<double> f;
    for (double x = 2.0e9; x <= 14.0e9 + 1.0; x += 0.01e9) {
        const double r = x / (0.5 * kFp);
        if (std::abs(r - std::round(r)) > 1e-6) {
            f.push_back(x);
        }
    }
    const auto g = signal_gain(st, f);
    double best = 0.0;
    double best_lo = 0.0;
    double peak = -1e9;
    double peak_f = 0.0;
    std::size_t start = 0;
    bool in_band = false;
    for (std::size_t i = 0; i <= g.size(); ++i) {
        const bool above = i < g.size() && g[i].gain_db > 10.0;
        if (i < g.size() && g[i].gain_db > peak) {
            peak = g[i].gain_db;
            peak_f = g[i].frequency;
        }
        if (above && !in_band) {
            start = i;
            in_band = true;
        } else if (!above && in_band) {
            const double w = g[i - 1].frequency - g[start].frequency + 0.01e9;
            if (w > best) {
                best = w;
                best_lo = g[start].frequency;
            }
            in_band = false;
        }
    }
    v.detail << " N=1000, widest contiguous band above 10 dB = " << best / 1e9 << " GHz";
    if (best > 0.0) {
        v.detail << " starting at " << best_lo / 1e9 << " GHz";
    }
    v.detail << ", peak gain " << peak << " dB at " << peak_f / 1e9 << " GHz (target > 1 GHz, accepted > 0.5 GHz)";
    v.require(best > 0.5e9, "band width");
}

// Criterion 4

std::vector<HarmonicState> fwm_sweep_states;

void fwm_transparency(Verdict& v) {
    const auto net = LadderNetwork::uniform(200, kIc, kC, 0.0);
    const HarmonicBasis basis{kFp, 7, true, 64};
    const auto levels = sweep_levels();
    auto sweep = continuation_sweep(net, basis, levels);
    v.require(!sweep.failure, "sweep converged");
    fwm_sweep_states = std::move(sweep.states);
    const auto mask = bundled_mask();
    const auto offs = log_offset_grid(1.0, 1e9, 10);
    const auto in = source_phase_noise(mask, kFp, basis.num_harmonics, offs);
    const std::vector<std::size_t> nodes = {200};
    double worst = 0.0;
    double worst_at = 0.0;
    for (const auto& st : fwm_sweep_states) {
        const auto out = phase_noise_spectra(st, mask, offs, nodes);
        for (std::size_t i = 0; i < offs.size(); ++i) {
            const double d = std::abs(out[0].ssb_dbc[i] - in[i]);
            if (d > worst) {
                worst = d;
                worst_at = offs[i];
            }
        }
    }
    v.detail << " N=200, " << fwm_sweep_states.size() << " levels -100..-86 dBm, max |output - input| = " << worst
             << " dB (at " << worst_at << " Hz)";
    v.require(worst <= 1.0, "within 1 dB");
}

// Criterion 5

std::vector<HarmonicState> twm_sweep_states;

void twm_regrowth(Verdict& v) {
    const auto net = LadderNetwork::uniform(1000, kIc, kC, 0.7e-6);
    const HarmonicBasis basis{kFp, 9, true, 64};
    const auto levels = sweep_levels();
    auto sweep = continuation_sweep(net, basis, levels);
    v.require(!sweep.failure, "sweep converged");
    twm_sweep_states = std::move(sweep.states);
    const auto mask = bundled_mask();
    const std::vector<double> offs = {100e6};
    const std::vector<std::size_t> nodes = {500, 1000};
    const double in = source_phase_noise(mask, kFp, basis.num_harmonics, offs)[0];
    std::vector<double> mid;
    std::vector<double> out;
    for (const auto& st : twm_sweep_states) {
        const auto s = phase_noise_spectra(st, mask, offs, nodes);
        mid.push_back(s[0].ssb_dbc[0]);
        out.push_back(s[1].ssb_dbc[0]);
    }
    v.detail << " N=1000, 100 MHz offset, input " << in << " dBc/Hz; output by level:";
    for (double x : out) {
        v.detail << " " << x;
    }
    v.detail << "; cell 500:";
    for (double x : mid) {
        v.detail << " " << x;
    }
    if (out.size() < 2) {
        v.require(false, "sweep too short");
        return;
    }
    const double growth = out.back() - out.front();
    const double mid_growth = mid.back() - mid.front();
    bool monotone = true;
    for (std::size_t i = 1; i < out.size(); ++i) {
        monotone = monotone && out[i] >= out[i - 1];
    }
    v.detail << "; output growth " << growth << " dB (target 20 +- 6, minimum 10), cell-500 growth " << mid_growth
             << " dB, output - input at -86 dBm " << out.back() - in << " dB, cell 500 - input " << mid.back() - in
             << " dB";
    v.require(growth >= 10.0, "growth >= 10 dB");
    v.require(monotone, "monotone");
    v.require(std::abs(mid_growth - 0.5 * growth) <= 4.0, "cell 500 about half the output growth");
}

// Criterion 6

void poly_parity(Verdict& v) {
    const auto mask = bundled_mask();
    const double fp = 10e9;
    const auto offs = log_offset_grid(1.0, 1e9, 10);
    const std::vector<double> amps = {0.1, 0.2, 0.3, 0.4, 0.5};

    double odd_spread = 0.0;
    std::vector<double> ref;
    for (double a : amps) {
        const auto out = poly_output_phase_noise(PolynomialAmp::odd_only(), {a, fp}, mask, offs);
        if (ref.empty()) {
            ref = out;
        }
        for (std::size_t i = 0; i < offs.size(); ++i) {
            odd_spread = std::max(odd_spread, std::abs(out[i] - ref[i]));
        }
    }

    const std::vector<double> high = {1e7, 1e8, 1e9};
    bool strictly = true;
    std::vector<double> prev(high.size(), -1e300);
    std::ostringstream rg;
    for (double a : amps) {
        const auto in = poly_input_phase_noise({a, fp}, mask, high);
        const auto out = poly_output_phase_noise(PolynomialAmp::all_ones(), {a, fp}, mask, high);
        for (std::size_t i = 0; i < high.size(); ++i) {
            const double r = out[i] - in[i];
            strictly = strictly && r > prev[i];
            prev[i] = r;
        }
        rg << " " << out.back() - in.back();
    }

    MonteCarloOptions mc;
    mc.seed = 1;
    const std::vector<double> mc_offs = {3e7, 1e8, 3e8, 1e9, 3e9};
    const auto est = monte_carlo_phase_noise(PolynomialAmp::all_ones(), {1.0, fp}, mask, mc_offs, mc);
    const auto closed = poly_output_phase_noise(PolynomialAmp::all_ones(), {1.0, fp}, mask, mc_offs);
    double worst = 0.0;
    int compared = 0;
    for (std::size_t i = 0; i < mc_offs.size(); ++i) {
        if (est.ci_half_width_db[i] < 1.0) {
            worst = std::max(worst, std::abs(est.ssb_dbc[i] - closed[i]));
            ++compared;
        }
    }
    v.detail << " f_p=10 GHz, V=0.1..0.5: odd-only spread " << odd_spread << " dB; all-ones regrowth at 1 GHz:"
             << rg.str() << " dB; Monte-Carlo vs closed form (V=1) max diff " << worst << " dB over " << compared
             << " offsets";
    v.require(odd_spread <= 0.1, "odd-only invariant");
    v.require(strictly, "all-ones strictly increasing");
    v.require(compared > 0 && worst <= 1.5, "Monte-Carlo agreement");
}

// Criterion 7

void overlap(Verdict& v) {
    const auto mask = bundled_mask();
    const double fp = 1e9;
    std::vector<double> offs;
    for (double f : log_offset_grid(1.0, 1.9e9, 10)) {
        const double r = f / (0.5 * fp);
        if (std::abs(r - std::round(r)) > 1e-9) {
            offs.push_back(f);
        }
    }
    const std::vector<double> amps = {0.1, 0.2, 0.3, 0.4, 0.5};
    const double knee = 1e3;  // close-in reference for the flat continuation

    auto regrowth = [&](const PolynomialAmp& p, double a) {
        const auto in = poly_input_phase_noise({a, fp}, mask, offs);
        const auto out = poly_output_phase_noise(p, {a, fp}, mask, offs);
        std::vector<double> r(offs.size());
        for (std::size_t i = 0; i < offs.size(); ++i) {
            r[i] = out[i] - in[i];
        }
        return r;
    };
    auto index_of = [&](double f) {
        return static_cast<std::size_t>(std::lower_bound(offs.begin(), offs.end(), f * (1 - 1e-12)) - offs.begin());
    };
    const std::size_t i_knee = index_of(knee);
    const std::size_t i_half = index_of(0.5 * fp);

    double odd_dev = 0.0;
    for (double a : amps) {
        const auto r = regrowth(PolynomialAmp::odd_only(), a);
        for (std::size_t i = i_knee; i < offs.size(); ++i) {
            odd_dev = std::max(odd_dev, std::abs(r[i] - r[i_knee]));
        }
    }
    // rise toward the top of the band relative to its minimum over the upper half
    auto rise = [&](const std::vector<double>& r) {
        const double lo = *std::min_element(r.begin() + static_cast<long>(i_half), r.end());
        return r.back() - lo;
    };
    const auto all = regrowth(PolynomialAmp::all_ones(), amps.back());
    const auto odd = regrowth(PolynomialAmp::odd_only(), amps.back());
    const double all_rise = rise(all);
    const double odd_rise = rise(odd);

    const std::vector<double> top = {offs.back()};
    const auto rep_all = cyclo_overlap_report(PolynomialAmp::all_ones(), {amps.back(), fp}, mask, top);
    const auto rep_odd = cyclo_overlap_report(PolynomialAmp::odd_only(), {amps.back(), fp}, mask, top);

    v.detail << " f_p=1 GHz, offsets to " << offs.back() / 1e9 << " GHz: odd-only max deviation from flat "
             << odd_dev << " dB; rise toward the top at V=0.5: all " << all_rise << " dB, odd " << odd_rise
             << " dB; all-ones regrowth at 1 kHz / 0.5 GHz / top: " << all[i_knee] << " / " << all[i_half] << " / "
             << all.back() << " dB; dominant replica at top: all " << rep_all.dominant[0] << ", odd "
             << rep_odd.dominant[0];

    // same sweep with a skirt that keeps falling past 100 MHz; reported only
    const auto falling = PhaseNoiseMask::load(std::string(TWPA_SOURCE_DIR) + "/configs/masks/falling_skirt.mask");
    const std::vector<double> probe = {0.45e9, 0.89e9};
    auto regrowth_at = [&](const PolynomialAmp& p) {
        const auto in = poly_input_phase_noise({amps.back(), fp}, falling, probe);
        const auto out = poly_output_phase_noise(p, {amps.back(), fp}, falling, probe);
        return std::pair{out[0] - in[0], out[1] - in[1]};
    };
    const auto [fa0, fa1] = regrowth_at(PolynomialAmp::all_ones());
    const auto [fo0, fo1] = regrowth_at(PolynomialAmp::odd_only());
    v.detail << "; with falling_skirt.mask (not graded) regrowth at 0.45 / 0.89 GHz: all " << fa0 << " / " << fa1
             << " dB, odd " << fo0 << " / " << fo1 << " dB";

    v.require(odd_dev < 0.5, "odd-only flat within 0.5 dB");
    v.require(all_rise >= 0.5 && all_rise > odd_rise + 0.5, "all-ones rising feature");
    v.require(rep_all.dominant[0] == 2, "2 f_p replica dominates all-ones");
    v.require(rep_odd.dominant[0] == 3, "3 f_p replica nearest for odd-only");
}

// Criterion 8

void conservation(Verdict& v) {
    double worst_pb = 0.0;
    std::size_t states = 0;
    for (const auto* group : {&fwm_states, &fwm_sweep_states, &twm_sweep_states}) {
        for (const auto& st : *group) {
            worst_pb = std::max(worst_pb, power_balance(st).relative_error());
            ++states;
        }
    }

    const auto net = LadderNetwork::uniform(3, kIc, kC, 0.7e-6);
    const HbSystem sys(net, HarmonicBasis{kFp, 5, true, 64}, 0.9e-6);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    std::vector<double> x(sys.size());
    for (auto& e : x) {
        e = u(rng);
    }
    BandedMatrix<double> jac(sys.size(), sys.bandwidth(), sys.bandwidth());
    sys.jacobian(x, jac);
    std::vector<double> rp(sys.size());
    std::vector<double> rm(sys.size());
    double worst_j = 0.0;
    double scale = 0.0;
    for (std::size_t j = 0; j < sys.size(); ++j) {
        const double x0 = x[j];
        x[j] = x0 + 1e-6;
        sys.residual(x, rp);
        x[j] = x0 - 1e-6;
        sys.residual(x, rm);
        x[j] = x0;
        for (std::size_t i = 0; i < sys.size(); ++i) {
            const double an = jac.in_band(i, j) ? jac(i, j) : 0.0;
            worst_j = std::max(worst_j, std::abs((rp[i] - rm[i]) / 2e-6 - an));
            scale = std::max(scale, std::abs(an));
        }
    }

    double parity = 0.0;
    for (const auto* group : {&fwm_states, &fwm_sweep_states}) {
        for (const auto& st : *group) {
            for (std::size_t c = 0; c < st.network().size(); ++c) {
                const double fund = std::abs(st.junction_phase(c, 1));
                for (int h = 2; h <= st.basis().num_harmonics; h += 2) {
                    parity = std::max(parity, std::abs(st.junction_phase(c, h)) / fund);
                }
            }
        }
    }
    v.detail << " power balance worst " << worst_pb << " over " << states << " converged states; Jacobian vs FD "
             << worst_j / scale << " (3 cells); zero-bias even/odd " << parity;
    v.require(states > 0 && worst_pb < 1e-6, "power balance");
    v.require(worst_j / scale < 1e-6, "Jacobian");
    v.require(parity < 1e-9, "parity");
}

}  // namespace

int main() {
    report(1, "junction inductance and Leeson spectrum exactness", eq_exactness);
    report(2, "4WM gain symmetric about the pump", fwm_symmetry);
    report(3, "3WM gain above 10 dB over a wide band", twm_band);
    report(4, "4WM phase-noise transparency across the pump sweep", fwm_transparency);
    report(5, "3WM phase-noise regrowth at 100 MHz", twm_regrowth);
    report(6, "polynomial parity, monotone regrowth, Monte-Carlo agreement", poly_parity);
    report(7, "replica overlap with a 1 GHz carrier", overlap);
    report(8, "power conservation, Jacobian, zero-bias parity", conservation);
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
