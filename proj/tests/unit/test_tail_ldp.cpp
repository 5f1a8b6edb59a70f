#include "catch_amalgamated.hpp"

#include "generators.hpp"
#include "mrnet/errors.hpp"
#include "mrnet/tail_ldp.hpp"

#include <cmath>
#include <vector>

using namespace mrnet;
using Catch::Approx;

namespace {

AlohaHopModel reference_hop() { return hop_model_from_contention(0.03, 0.1, 10.0); }

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
    return out;
}

}  // namespace

TEST_CASE("a = 0 gives phi(x) = (x-1)/x", "[tail_ldp]") {
    AlohaHopModel hop(0.6, 1.0, 0.2);
    for (double x : {hop.mean_T() + 0.1, 3.0, 7.5, 40.0}) {
        auto r = rate_plus(hop, x);
        CHECK(r.phi_x == Approx((x - 1) / x).epsilon(1e-14));
        CHECK(r.y1 == std::numeric_limits<double>::infinity());
        CHECK(r.i_plus == Approx(rate_plus_numeric(hop, x)).margin(1e-8));
    }
}

TEST_CASE("rate function vanishes at the mean", "[tail_ldp]") {
    testgen::Engine rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        auto hop = testgen::random_hop_model(rng);
        CHECK(rate_plus(hop, hop.mean_T()).i_plus < 1e-12);
        CHECK(rate_plus(hop, hop.mean_T() + 1e-9).i_plus < 1e-6);
        CHECK(rate_plus_numeric(hop, hop.mean_T() + 1e-9) < 1e-6);
    }
}

TEST_CASE("rate function domain", "[tail_ldp]") {
    auto hop = reference_hop();
    CHECK_THROWS_AS(rate_plus(hop, 1.0), DomainError);
    CHECK_THROWS_AS(rate_plus(hop, hop.mean_T() - 0.1), DomainError);
    CHECK_THROWS_AS(rate_plus_numeric(hop, hop.mean_T() - 0.1), DomainError);
    CHECK_THROWS_AS(rate_minus(hop, 0.5), DomainError);
    CHECK(rate_minus(hop, 1.0) == 0.0);
}

TEST_CASE("closed form against numeric sup at the reference model", "[tail_ldp]") {
    auto hop = reference_hop();
    for (double x : {5.0, 6.0, 9.625, 12.0, 15.0, 20.0, 30.0}) {
        auto r = rate_plus(hop, x);
        CHECK(std::abs(r.i_plus - rate_plus_numeric(hop, x)) < 1e-8);
        CHECK(r.omega_star == Approx(std::log(r.phi_x / r.c)).epsilon(1e-14));
        CHECK(r.phi_x > 0.0);
        CHECK(r.phi_x < 1.0);
    }
    CHECK(rate_plus(hop, 2 * hop.mean_T()).i_plus == Approx(0.0845587).margin(1e-6));
}

TEST_CASE("closed form against numeric sup on random models", "[tail_ldp][property]") {
    testgen::Engine rng(42);
    for (int trial = 0; trial < 60; ++trial) {
        auto hop = testgen::random_hop_model(rng);
        for (double f : {1.01, 1.2, 1.5, 2.0, 3.0, 5.0, 10.0}) {
            const double x = std::max(hop.mean_T() * f, 1.0001);
            if (x < hop.mean_T()) continue;
            auto r = rate_plus(hop, x);
            CHECK(std::abs(r.i_plus - rate_plus_numeric(hop, x)) < 1e-8);
            CHECK(r.A_lower <= r.A * (1 + 1e-12));
            CHECK(r.A < r.A_upper);
            CHECK(r.y2 > 0.0);
            CHECK(r.y2 < 1.0 / r.c);
            CHECK(r.y1 > 1.0 / r.a);
        }
    }
}

TEST_CASE("omega is concave on its domain", "[tail_ldp][property]") {
    testgen::Engine rng(43);
    for (int trial = 0; trial < 40; ++trial) {
        auto hop = testgen::random_hop_model(rng);
        const double x = 2 * hop.mean_T();
        const double top = -std::log(hop.c());
        auto omega = [&](double w) { return x * w - std::log(hop.delay_mgf()(std::exp(w))); };
        const double h = top / 400;
        for (int i = 1; i < 399; ++i) {
            const double w = i * h;
            CHECK(omega(w + h) - 2 * omega(w) + omega(w - h) <= 1e-8);
        }
        CHECK(omega(0.0) == Approx(0.0).margin(1e-14));
    }
}

TEST_CASE("rate function is strictly increasing past the mean", "[tail_ldp][property]") {
    testgen::Engine rng(44);
    for (int trial = 0; trial < 40; ++trial) {
        auto hop = testgen::random_hop_model(rng);
        double prev = -1.0;
        for (double x : linspace(hop.mean_T() * 1.001, hop.mean_T() * 6, 200)) {
            const double v = rate_plus(hop, x).i_plus;
            CHECK(v > prev);
            prev = v;
        }
    }
}

TEST_CASE("single-hop exponents", "[tail_ldp]") {
    auto hop = reference_hop();
    CHECK(rate_minus(hop, 2.0) == Approx(0.0751529).margin(1e-6));
    CHECK(rate_minus(hop, 2.0) == Approx(-std::log(hop.c())).epsilon(1e-15));
    CHECK(rate_minus_exact(hop, 2.0) == Approx(-std::log(hop.delay_survival(2))).epsilon(1e-13));
    for (double x : linspace(hop.mean_T() * 1.0001, 5 * hop.mean_T(), 400)) {
        auto r = rate_plus(hop, x);
        CHECK(r.i_plus <= r.i_minus);
        CHECK(r.i_plus <= r.i_minus_exact);
    }
}

TEST_CASE("Chernoff exponent never exceeds the exact single-hop exponent", "[tail_ldp][property]") {
    testgen::Engine rng(45);
    for (int trial = 0; trial < 60; ++trial) {
        auto hop = testgen::random_hop_model(rng);
        for (double x : linspace(hop.mean_T() * 1.0001, 5 * hop.mean_T(), 50)) {
            if (x <= 1.0) continue;
            CHECK(rate_plus(hop, x).i_plus <= rate_minus_exact(hop, x) + 1e-12);
        }
    }
}

TEST_CASE("tail bounds with a point-mass hop count", "[tail_ldp]") {
    auto hop = reference_hop();
    auto grid = linspace(hop.mean_T() + 0.5, 4 * hop.mean_T(), 20);
    auto curve = tail_bounds(HopCountPmf::point_mass(1), hop, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(curve.upper[i] == Approx(std::exp(-rate_plus(hop, grid[i]).i_plus)).epsilon(1e-14));
        CHECK(curve.approx[i] == Approx(curve.upper[i]).epsilon(1e-14));
    }
}

TEST_CASE("tail curve invariants", "[tail_ldp][property]") {
    testgen::Engine rng(46);
    for (int trial = 0; trial < 40; ++trial) {
        auto hop = testgen::random_hop_model(rng);
        auto pmf = testgen::random_pmf(rng, testgen::uniform_int(rng, 1, 40));
        auto grid = linspace(1.5, 6 * hop.mean_T() + 2, 60);
        auto curve = tail_bounds(pmf, hop, grid);
        const double mean_L = distance_stats(pmf).mean;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(curve.lower[i] >= 0.0);
            CHECK(curve.upper[i] <= 1.0);
            CHECK(curve.lower[i] <= curve.upper[i]);
            CHECK(curve.approx[i] <= curve.upper[i] * (1 + 1e-12));
            if (i > 0) CHECK(curve.upper[i] <= curve.upper[i - 1]);
            if (grid[i] > hop.mean_T()) {
                const double ip = rate_plus(hop, grid[i]).i_plus;
                CHECK(std::exp(-ip * mean_L) <= mgf_L(pmf, std::exp(-ip)) + 1e-12);
            }
        }
    }
}

TEST_CASE("larger mean hop count lowers the tail", "[tail_ldp]") {
    auto hop = reference_hop();
    auto grid = linspace(hop.mean_T() * 1.1, 4 * hop.mean_T(), 20);
    auto near = tail_bounds(HopCountPmf::geometric(0.2), hop, grid);
    auto far = tail_bounds(HopCountPmf::geometric(0.01), hop, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(far.upper[i] < near.upper[i]);
        CHECK(far.approx[i] < near.approx[i]);
        CHECK(far.lower[i] < near.lower[i]);
    }
}

TEST_CASE("exact tail sits inside the bounds on small instances", "[tail_ldp][oracle]") {
    testgen::Engine rng(47);
    for (int trial = 0; trial < 25; ++trial) {
        auto hop = testgen::random_hop_model(rng);
        auto pmf = testgen::random_pmf(rng, testgen::uniform_int(rng, 1, 20));
        auto hop_pmf = perhop_pmf(hop);
        auto grid = linspace(hop.mean_T() * 1.01, 4 * hop.mean_T() * 0.99, 20);
        auto curve = tail_bounds(pmf, hop, grid);
        auto exact = transport_exceedance_oracle(pmf, hop_pmf, grid);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            INFO("x=" << grid[i] << " lo=" << exact[i].lo << " lower=" << curve.lower[i] << " upper=" << curve.upper[i]);
            CHECK(exact[i].hi >= curve.lower[i] * (1 - 1e-12));
            CHECK(exact[i].lo <= curve.upper[i]);
        }
    }
}

TEST_CASE("precision delta for a single hop is finite", "[tail_ldp][oracle]") {
    auto hop = reference_hop();
    for (double x : {6.0, 9.0, 15.0}) {
        auto d = precision_delta(HopCountPmf::point_mass(1), hop, x);
        CHECK(std::isfinite(d.delta));
        CHECK(d.exact.lo > 0.0);
        // For L = 1 the exact tail is Pr{T > x}.
        CHECK(d.exact.mid() == Approx(hop.delay_survival(static_cast<long>(std::floor(x)))).epsilon(1e-8));
    }
}

TEST_CASE("precision delta shrinks with the mean hop count", "[tail_ldp][oracle]") {
    auto hop = reference_hop();
    const double x = 2 * hop.mean_T();
    std::vector<double> deltas;
    for (double g : {0.2, 0.05, 0.01}) deltas.push_back(std::abs(precision_delta(HopCountPmf::geometric(g), hop, x).delta));
    CHECK(deltas[1] <= deltas[0]);
    CHECK(deltas[2] <= deltas[1]);
    CHECK(deltas[2] * 2 <= deltas[0]);
}

TEST_CASE("deterministic hop law has infinite exponents", "[tail_ldp]") {
    AlohaHopModel det(1.0, 0.5, 0.1);
    CHECK(std::isinf(rate_plus(det, 2.0).i_plus));
    CHECK(std::isinf(rate_plus_numeric(det, 2.0)));
    CHECK(std::isinf(rate_minus(det, 2.0)));
    auto curve = tail_bounds(HopCountPmf({0.5, 0.5}), det, std::vector<double>{1.5, 3.0});
    CHECK(curve.upper[0] == 0.0);
    CHECK(curve.lower[0] == 0.0);
}
