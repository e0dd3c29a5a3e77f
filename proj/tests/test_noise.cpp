#include <catch_amalgamated.hpp>

#include <cmath>

#include "twpa/noise.hpp"

using namespace twpa;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

PhaseNoiseMask two_point() { return PhaseNoiseMask({{10.0, -50.0}, {100.0, -70.0}}); }

PhaseNoiseMask bundled() {
    return PhaseNoiseMask::load(std::string(TWPA_SOURCE_DIR) + "/configs/masks/anapico_representative.mask");
}

double db(double x) { return 10.0 * std::log10(x); }

}  // namespace

TEST_CASE("leeson limits") {
    LeesonParams p;
    p.noise_factor = 3.0;
    p.temperature = 300.0;
    p.tone_power = 1e-3;
    p.loaded_q = 50.0;
    p.center_frequency = 10e9;
    p.corner_frequency = 1e4;
    const double floor = p.noise_factor * kBoltzmann * p.temperature / (2.0 * p.tone_power);

    CHECK_THAT(leeson_spectrum(p, 1e12 * p.corner_frequency), WithinRel(floor, 1e-6));

    // deep inside both corners the skirt falls as 1/f^3
    const double f1 = 1.0;
    const double f2 = 1.01;
    const double slope = std::log10(leeson_spectrum(p, f2) / leeson_spectrum(p, f1)) / std::log10(f2 / f1);
    CHECK_THAT(slope, WithinAbs(-3.0, 0.05));

    p.loaded_q = 1e12;
    CHECK_THAT(leeson_spectrum(p, p.corner_frequency), WithinRel(2.0 * floor, 1e-9));

    CHECK_THROWS(leeson_spectrum(p, 0.0));
    p.tone_power = 0.0;
    CHECK_THROWS(p.validate());
}

TEST_CASE("mask interpolation") {
    const auto m = two_point();
    CHECK(mask_spectrum(m, 100.0) == -70.0);
    CHECK(mask_spectrum(m, 10.0) == -50.0);
    CHECK_THAT(mask_spectrum(m, std::sqrt(1000.0)), WithinAbs(-60.0, 1e-12));
    CHECK_THAT(mask_spectrum(m, 31.62), WithinAbs(-60.0, 1e-3));
    CHECK(mask_spectrum(m, 1.0) == -50.0);
    CHECK(mask_spectrum(m, 1e6) == -70.0);
    CHECK_THAT(mask_linear(m, 100.0), WithinRel(1e-7, 1e-12));
}

TEST_CASE("mask text format") {
    const auto m = PhaseNoiseMask::parse("# header\n10 -50\n\n100  -70   # trailing\n1e3\t-90\n");
    REQUIRE(m.points().size() == 3);
    CHECK(m.points()[2].offset == 1e3);
    CHECK(m.points()[2].level_dbc == -90.0);

    const auto again = PhaseNoiseMask::parse(m.to_text());
    CHECK(again.points().size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(again.points()[i].offset == m.points()[i].offset);
        CHECK(again.points()[i].level_dbc == m.points()[i].level_dbc);
    }

    CHECK_THROWS_WITH(PhaseNoiseMask::parse("10 -50\n100 x\n"), ContainsSubstring("line 2"));
    CHECK_THROWS(PhaseNoiseMask::parse("10 -50\n"));
    CHECK_THROWS(PhaseNoiseMask::parse("10 -50\n10 -60\n"));
    CHECK_THROWS(PhaseNoiseMask::parse("-10 -50\n10 -60\n"));
    CHECK_THROWS(PhaseNoiseMask::load("/nonexistent/mask"));
}

TEST_CASE("bundled mask loads") {
    const auto m = bundled();
    CHECK(m.points().size() == 9);
    CHECK(mask_spectrum(m, 1e9) == -150.0);
}

TEST_CASE("leeson mask stores L = S/2") {
    const LeesonParams p;
    const std::vector<double> f = {10.0, 1e3, 1e5, 1e7};
    const auto m = PhaseNoiseMask::from_leeson(p, f);
    for (double x : f) {
        CHECK_THAT(mask_spectrum(m, x), WithinAbs(db(leeson_spectrum(p, x) / 2.0), 1e-9));
    }
}

TEST_CASE("pure phase modulation through the estimator") {
    const PhaseNoiseMask m({{1.0, -90.0}, {1e9, -90.0}});
    for (double phase : {0.0, 0.3, -2.0}) {
        const auto s = mask_to_input_sidebands(m, 0.37, 1e5, phase);
        CHECK_THAT(compute_S_phi(s), WithinRel(2e-9, 1e-12));
        CHECK_THAT(compute_S_a(s), WithinAbs(0.0, 1e-24));
        CHECK_THAT(db(compute_S_phi(s)), WithinAbs(-86.9897, 1e-4));
        CHECK_THAT(ssb_phase_noise(s), WithinAbs(-90.0, 1e-10));
    }
    const PhaseNoiseMask silent({{1.0, -400.0}, {10.0, -400.0}});
    const auto s = mask_to_input_sidebands(silent, 1.0, 5.0);
    CHECK(s.upper_power < 1e-39);
}

TEST_CASE("estimator corner cases") {
    SidebandCorrelation s;
    s.carrier_amplitude = 2.0;
    s.upper_power = s.lower_power = 4e-10;

    SECTION("uncorrelated sidebands split evenly") {
        CHECK_THAT(compute_S_phi(s), WithinRel(1e-10, 1e-12));
        CHECK_THAT(compute_S_a(s), WithinRel(1e-10, 1e-12));
    }
    SECTION("correlated AM cancels in phase") {
        s.carrier_phase = 0.4;
        s.cross = 4e-10 * std::exp(std::complex<double>(0.0, -0.8));
        CHECK_THAT(compute_S_phi(s), WithinAbs(0.0, 1e-24));
        CHECK_THAT(compute_S_a(s), WithinRel(2e-10, 1e-12));
    }
    SECTION("ssb of 2e-7") {
        s.carrier_amplitude = 1.0;
        s.upper_power = s.lower_power = 1e-7;
        s.cross = -1e-7;
        CHECK_THAT(compute_S_phi(s), WithinRel(2e-7, 1e-12));
        CHECK_THAT(ssb_phase_noise(s), WithinAbs(-70.0, 1e-10));
    }
    SECTION("no carrier") {
        s.carrier_amplitude = 0.0;
        CHECK_THROWS_AS(compute_S_phi(s), std::domain_error);
    }
    SECTION("zero noise is below the floor") {
        s.upper_power = s.lower_power = 0.0;
        CHECK(ssb_phase_noise(s) == kBelowFloor);
    }
}

TEST_CASE("source covariance is hermitian and reproduces the mask") {
    const auto m = bundled();
    const int k = 5;
    const int n = 2 * k + 1;
    for (double off : {1.0, 1e3, 3e8, 2.2e9, 7e9}) {
        const auto cov = pm_source_covariance(m, 1e-6, 0.3, 8e9, k, off);
        REQUIRE(cov.size() == static_cast<std::size_t>(n * n));
        for (int i = 0; i < n; ++i) {
            CHECK(cov[i * n + i].real() >= 0.0);
            for (int j = 0; j < n; ++j) {
                CHECK(std::abs(cov[i * n + j] - std::conj(cov[j * n + i])) <= 1e-30);
                CHECK(std::norm(cov[i * n + j]) <= cov[i * n + i].real() * cov[j * n + j].real() * (1.0 + 1e-12));
            }
        }
    }
    const std::vector<double> offs = {1.0, 10.0, 1e4, 1e8, 4e9};
    const auto src = source_phase_noise(m, 8e9, 5, offs);
    for (std::size_t i = 0; i < offs.size(); ++i) {
        CHECK_THAT(src[i], WithinAbs(mask_spectrum(m, offs[i]), 1e-9));
    }
}

TEST_CASE("weakly pumped line transfers phase noise like a linear filter") {
    // a linear line maps the PM sidebands through H(f_p + df) and H(f_p - df); the phase part of
    // the result is |h_u + conj(h_l)|^2 / 4 with h relative to the carrier transfer
    const std::size_t cells = 60;
    const double bias = 0.7e-6;
    const auto net = LadderNetwork::uniform(cells, 1.4e-6, 93e-15, bias);
    const HarmonicBasis basis{8.03e9, 5, true, 64};
    const auto st = solve_steady_state(net, 2.0 * power_dbm_to_current_amplitude(-140.0, 50.0), basis);
    const auto m = bundled();
    const std::vector<double> offs = {1.0, 1e3, 1e6, 1e8, 1e9};
    const std::vector<std::size_t> nodes = {0, cells};
    const auto in = source_phase_noise(m, basis.fundamental, basis.num_harmonics, offs);
    const auto out = phase_noise_spectra(st, m, offs, nodes);
    const double l = jj_inductance(bias, JosephsonJunction{1.4e-6});
    auto ladder = [&](double f, bool at_output) {
        const std::complex<double> jw{0.0, 2.0 * kPi * f};
        std::complex<double> v = 1.0;
        std::complex<double> i = v * (1.0 / 50.0 + jw * 93e-15);
        for (std::size_t k = cells; k-- > 0;) {
            v += jw * l * i;
            if (k > 0) {
                i += jw * 93e-15 * v;
            }
        }
        const auto inj = i + v / 50.0;
        return at_output ? 1.0 / inj : v / inj;
    };
    for (std::size_t slot = 0; slot < nodes.size(); ++slot) {
        const bool at_output = slot == 1;
        const auto zc = ladder(basis.fundamental, at_output);
        for (std::size_t i = 0; i < offs.size(); ++i) {
            const auto hu = ladder(basis.fundamental + offs[i], at_output) / zc;
            const auto hl = ladder(basis.fundamental - offs[i], at_output) / zc;
            const double expected = in[i] + db(std::norm(hu + std::conj(hl)) / 4.0);
            INFO("node " << nodes[slot] << " offset " << offs[i]);
            CHECK(out[slot].node == nodes[slot]);
            CHECK_THAT(out[slot].ssb_dbc[i], WithinAbs(expected, 0.01));
            if (offs[i] <= 1e6) {
                CHECK_THAT(out[slot].ssb_dbc[i], WithinAbs(in[i], 0.01));
            }
        }
    }
}

TEST_CASE("propagated correlations obey Cauchy-Schwarz") {
    const auto net = LadderNetwork::uniform(40, 1.4e-6, 93e-15, 0.7e-6);
    const HarmonicBasis basis{8.03e9, 7, true, 64};
    const auto st = solve_steady_state(net, 1.2e-6, basis);
    const std::vector<std::size_t> nodes = {0, 20, 40};
    NoiseOptions opts;
    opts.include_thermal = true;
    for (double off : {10.0, 1e5, 1e8}) {
        const auto s = propagate_pump_phase_noise(st, bundled(), off, nodes, opts);
        for (std::size_t slot = 0; slot < nodes.size(); ++slot) {
            for (int h = 1; h <= basis.num_harmonics; ++h) {
                const auto& c = s.at(slot, h);
                CHECK(c.upper_power >= 0.0);
                CHECK(c.lower_power >= 0.0);
                CHECK(std::norm(c.cross) <= c.upper_power * c.lower_power * (1.0 + 1e-9));
            }
        }
    }
}

TEST_CASE("thermal noise only adds") {
    const auto net = LadderNetwork::uniform(20, 1.4e-6, 93e-15, 0.0);
    const HarmonicBasis basis{8.03e9, 5, true, 64};
    const auto st = solve_steady_state(net, 1e-6, basis);
    const std::vector<double> offs = {1e3, 1e7, 1e9};
    const std::vector<std::size_t> nodes = {20};
    NoiseOptions hot;
    hot.include_thermal = true;
    hot.temperature = 300.0;
    const auto cold = phase_noise_spectra(st, bundled(), offs, nodes);
    const auto warm = phase_noise_spectra(st, bundled(), offs, nodes, hot);
    for (std::size_t i = 0; i < offs.size(); ++i) {
        CHECK(warm[0].ssb_dbc[i] >= cold[0].ssb_dbc[i]);
    }
    // kT/P at room temperature and a -80 dBm class carrier dominates the -150 dBc floor
    CHECK(warm[0].ssb_dbc[2] > cold[0].ssb_dbc[2] + 3.0);
}

TEST_CASE("logarithmic offset grid") {
    const auto g = log_offset_grid(1.0, 1e9, 10);
    CHECK(g.size() == 91);
    CHECK(g.front() == 1.0);
    CHECK(g.back() == 1e9);
    CHECK_THAT(g[10], WithinRel(10.0, 1e-12));
    const auto h = log_offset_grid(1.0, 1.9e9, 10);
    CHECK(h.back() == 1.9e9);
    CHECK(h[h.size() - 2] < 1.9e9);
    CHECK_THROWS(log_offset_grid(0.0, 1.0, 10));
    CHECK_THROWS(log_offset_grid(10.0, 1.0, 10));
}
