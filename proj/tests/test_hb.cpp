#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "twpa/hb.hpp"
#include "twpa/hb_kernels.hpp"

using namespace twpa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

HarmonicBasis basis(int k, double f0 = 8.03e9) { return HarmonicBasis{f0, k, true, 64}; }

std::vector<double> random_state(std::size_t nodes, int k, double spread, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-spread, spread);
    std::vector<double> x(nodes * static_cast<std::size_t>(2 * k + 1));
    for (auto& v : x) {
        v = u(rng);
    }
    return x;
}

double even_to_odd_ratio(const HarmonicState& st) {
    double even = 0.0;
    double fund = 0.0;
    for (std::size_t c = 0; c < st.network().size(); ++c) {
        fund = std::max(fund, std::abs(st.junction_phase(c, 1)));
        for (int h = 2; h <= st.basis().num_harmonics; h += 2) {
            even = std::max(even, std::abs(st.junction_phase(c, h)));
        }
    }
    return even / fund;
}

}  // namespace

TEST_CASE("jacobian matches central differences on a 3-cell line") {
    const int k = 5;
    for (double bias : {0.0, 0.7e-6}) {
        const auto net = LadderNetwork::uniform(3, 1.4e-6, 93e-15, bias);
        const HbSystem sys(net, basis(k), 0.8e-6);
        auto x = random_state(net.num_nodes(), k, 0.3, 11);
        BandedMatrix<double> jac(sys.size(), sys.bandwidth(), sys.bandwidth());
        sys.jacobian(x, jac);

        const double h = 1e-6;
        std::vector<double> rp(sys.size());
        std::vector<double> rm(sys.size());
        double worst = 0.0;
        double scale = 0.0;
        for (std::size_t j = 0; j < sys.size(); ++j) {
            const double x0 = x[j];
            x[j] = x0 + h;
            sys.residual(x, rp);
            x[j] = x0 - h;
            sys.residual(x, rm);
            x[j] = x0;
            for (std::size_t i = 0; i < sys.size(); ++i) {
                const double fd = (rp[i] - rm[i]) / (2.0 * h);
                const double an = jac.in_band(i, j) ? jac(i, j) : 0.0;
                worst = std::max(worst, std::abs(fd - an));
                scale = std::max(scale, std::abs(an));
            }
        }
        INFO("bias " << bias << " worst " << worst << " scale " << scale);
        CHECK(worst / scale < 1e-6);
    }
}

TEST_CASE("openmp junction kernel equals the serial reference") {
    const int k = 7;
    const auto net = LadderNetwork::uniform(50, 1.4e-6, 93e-15, 0.7e-6);
    const auto x = random_state(net.num_nodes(), k, 0.2, 3);
    const kernels::TimeGrid grid(k, 64);
    kernels::JunctionEval a;
    kernels::JunctionEval b;
    kernels::evaluate_junctions(net, grid, x, a);
    kernels::evaluate_junctions_serial(net, k, 64, x, b);
    REQUIRE(a.current.size() == b.current.size());
    for (std::size_t i = 0; i < a.current.size(); ++i) {
        CHECK_THAT(a.current[i], WithinAbs(b.current[i], 1e-12 * 1.4e-6));
    }
    for (std::size_t i = 0; i < a.gamma.size(); ++i) {
        CHECK(std::abs(a.gamma[i] - b.gamma[i]) < 1e-12 * 1.4e-6);
    }
    for (std::size_t i = 0; i < a.peak_phase.size(); ++i) {
        CHECK_THAT(a.peak_phase[i], WithinAbs(b.peak_phase[i], 1e-12));
    }
}

TEST_CASE("no pump leaves only the DC operating point") {
    const auto net = LadderNetwork::uniform(10, 1.4e-6, 93e-15, 0.7e-6);
    const auto st = solve_steady_state(net, 0.0, basis(5));
    for (std::size_t n = 0; n < net.num_nodes(); ++n) {
        for (int h = 1; h <= 5; ++h) {
            CHECK(st.node_phase(n, h) == cplx{});
        }
    }
    for (std::size_t c = 0; c < net.size(); ++c) {
        CHECK_THAT(1.4e-6 * std::sin(st.junction_phase(c, 0).real()), WithinRel(0.7e-6, 1e-9));
    }
}

TEST_CASE("zero bias suppresses even harmonics") {
    const auto net = LadderNetwork::uniform(40, 1.4e-6, 93e-15, 0.0);
    const auto st = solve_steady_state(net, 1.4e-6, basis(7));
    CHECK(even_to_odd_ratio(st) < 1e-9);

    double even_i = 0.0;
    double fund_i = 0.0;
    for (std::size_t c = 0; c < net.size(); ++c) {
        fund_i = std::max(fund_i, std::abs(st.junction_current(c, 1)));
        even_i = std::max(even_i, std::abs(st.junction_current(c, 2)));
    }
    CHECK(even_i < 1e-3 * fund_i);
}

TEST_CASE("dc bias creates even harmonics") {
    const auto net = LadderNetwork::uniform(200, 1.4e-6, 93e-15, 0.7e-6);
    const auto st = solve_steady_state(net, 0.6e-6, basis(7));
    CHECK(std::abs(st.node_voltage(100, 2)) > 1e-3 * std::abs(st.node_voltage(100, 1)));
}

TEST_CASE("converged states conserve power") {
    for (double bias : {0.0, 0.7e-6}) {
        const auto net = LadderNetwork::uniform(60, 1.4e-6, 93e-15, bias);
        const auto st = solve_steady_state(net, 1.0e-6, basis(7));
        const auto pb = power_balance(st);
        INFO("bias " << bias << " source " << pb.source_power << " rs " << pb.source_resistor
                     << " rl " << pb.load_resistor);
        CHECK(pb.source_power > 0.0);
        CHECK(pb.relative_error() < 1e-6);
    }
}

TEST_CASE("single-level sweep equals a direct solve") {
    const auto net = LadderNetwork::uniform(30, 1.4e-6, 93e-15, 0.0);
    const double level[] = {0.9e-6};
    const auto sweep = continuation_sweep(net, basis(5), level);
    const auto direct = solve_steady_state(net, level[0], basis(5));
    REQUIRE(sweep.states.size() == 1);
    CHECK_FALSE(sweep.failure);
    const auto a = sweep.states[0].coefficients();
    const auto b = direct.coefficients();
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK_THAT(a[i], WithinAbs(b[i], 1e-10));
    }
}

TEST_CASE("sweep stops with a failure beyond the critical region") {
    const auto net = LadderNetwork::uniform(50, 1.4e-6, 93e-15, 0.0);
    const std::vector<double> levels = {2.0 * power_dbm_to_current_amplitude(-90.0, 50.0),
                                        2.0 * power_dbm_to_current_amplitude(-86.0, 50.0),
                                        2.0 * power_dbm_to_current_amplitude(-60.0, 50.0)};
    const auto sweep = continuation_sweep(net, basis(5), levels);
    CHECK(sweep.states.size() == 2);
    REQUIRE(sweep.failure);
    CHECK(sweep.last_converged_amplitude >= levels[1]);
    CHECK(sweep.last_converged_amplitude < levels[2]);
    // the last reachable line current sits near Ic, i.e. about -73 dBm available power
    const double dbm = current_amplitude_to_power_dbm(0.5 * sweep.last_converged_amplitude, 50.0);
    CHECK(dbm > -80.0);
    CHECK(dbm < -70.0);

    CHECK_THROWS_AS(solve_steady_state(net, levels[2], basis(5)), SolverFailure);
}

TEST_CASE("sweep levels must ascend") {
    const auto net = LadderNetwork::uniform(5, 1.4e-6, 93e-15, 0.0);
    const std::vector<double> levels = {1e-6, 0.5e-6};
    CHECK_THROWS(continuation_sweep(net, basis(3), levels));
}

TEST_CASE("basis validation") {
    CHECK_THROWS(HarmonicBasis{0.0, 5, true, 64}.validate());
    CHECK_THROWS(HarmonicBasis{8e9, 0, true, 64}.validate());
    CHECK_THROWS(HarmonicBasis{8e9, 9, true, 8}.validate());
    CHECK_NOTHROW(HarmonicBasis{8e9, 9, true, 64}.validate());
}
