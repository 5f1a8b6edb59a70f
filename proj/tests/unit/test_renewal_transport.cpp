#include "catch_amalgamated.hpp"

#include "generators.hpp"
#include "mrnet/errors.hpp"
#include "mrnet/renewal_transport.hpp"

#include <cmath>
#include <vector>

using namespace mrnet;
using Catch::Approx;

namespace {

// Stationary law by power iteration on the lazy chain (P + I) / 2, which removes
// the periodicity a point-mass pmf would otherwise create.
std::vector<double> power_iteration(const Eigen::MatrixXd& p) {
    const auto n = p.rows();
    Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(n, 1.0 / n);
    const Eigen::MatrixXd lazy = 0.5 * (p + Eigen::MatrixXd::Identity(n, n));
    for (int it = 0; it < 200000; ++it) {
        Eigen::RowVectorXd next = pi * lazy;
        const double diff = (next - pi).cwiseAbs().sum();
        pi = next;
        if (diff < 1e-15) break;
    }
    return {pi.data(), pi.data() + n};
}

DelayPmf point_delay(long k) {
    DelayPmf d;
    d.offset = k;
    d.masses = {1.0};
    return d;
}

// Brute-force enumeration of Pr{T_1 + ... + T_l > l x} for a short hop pmf.
double enumerate_exceedance(const HopCountPmf& pmf, const DelayPmf& hop, double x) {
    double total = 0.0;
    for (int l = 1; l <= pmf.phi(); ++l) {
        if (pmf(l) == 0.0) continue;
        std::vector<double> dist{1.0};  // index = sum
        for (int j = 0; j < l; ++j) {
            std::vector<double> next(dist.size() + static_cast<std::size_t>(hop.last()), 0.0);
            for (std::size_t s = 0; s < dist.size(); ++s)
                for (long k = hop.offset; k <= hop.last(); ++k) next[s + static_cast<std::size_t>(k)] += dist[s] * hop.at(k);
            dist.swap(next);
        }
        double p = 0.0;
        for (std::size_t s = 0; s < dist.size(); ++s)
            if (static_cast<double>(s) > l * x) p += dist[s];
        total += pmf(l) * p;
    }
    return total;
}

}  // namespace

TEST_CASE("transition matrix structure", "[renewal_transport]") {
    auto p2 = transition_matrix(HopCountPmf({0.5, 0.5}));
    Eigen::Matrix2d expected;
    expected << 0.5, 0.5, 1.0, 0.0;
    CHECK(p2.isApprox(expected, 0.0));

    auto p1 = transition_matrix(HopCountPmf({1.0}));
    CHECK(p1.rows() == 1);
    CHECK(p1(0, 0) == 1.0);

    auto p3 = transition_matrix(HopCountPmf({0.2, 0.3, 0.5}));
    CHECK(p3(2, 0) == 0.0);
    CHECK(p3(2, 1) == 1.0);
    CHECK(p3(2, 2) == 0.0);
}

TEST_CASE("embedded limits", "[renewal_transport]") {
    auto pi = embedded_limits(HopCountPmf({0.5, 0.5}));
    CHECK(pi[0] == Approx(2.0 / 3).epsilon(1e-15));
    CHECK(pi[1] == Approx(1.0 / 3).epsilon(1e-15));
    CHECK(embedded_limits(HopCountPmf({1.0})) == std::vector<double>{1.0});
}

TEST_CASE("embedded limits are the stationary law of the chain", "[renewal_transport][property]") {
    testgen::Engine rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        auto pmf = testgen::random_pmf(rng, testgen::uniform_int(rng, 1, 50));
        auto p = transition_matrix(pmf);
        for (int i = 0; i < p.rows(); ++i) CHECK(p.row(i).sum() == Approx(1.0).epsilon(1e-14));
        auto pi = embedded_limits(pmf);
        auto oracle = power_iteration(p);
        double sum = 0.0;
        for (std::size_t i = 0; i < pi.size(); ++i) {
            CHECK(std::abs(pi[i] - oracle[i]) < 1e-10);
            sum += pi[i];
        }
        CHECK(sum == Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("transport stats with deterministic hops", "[renewal_transport]") {
    TransportModel model{HopCountPmf({0.2, 0.3, 0.5}), AlohaHopModel(1.0, 0.5, 0.0)};
    auto st = transport_stats(model);
    for (double z : {0.0, 0.25, 0.6, 1.0}) CHECK(st.mgf(z) == Approx(mgf_L(model.pmf, z)).epsilon(1e-15));
    CHECK(st.mean == Approx(distance_stats(model.pmf).mean));

    TransportModel fixed{HopCountPmf::point_mass(4), AlohaHopModel(1.0, 0.5, 0.0)};
    auto fs = transport_stats(fixed);
    CHECK(fs.mean == 4.0);
    CHECK(fs.residual_mean == Approx(2.5).epsilon(1e-15));
    CHECK(fs.residual_mgf(1.0) == Approx(1.0).epsilon(1e-15));
}

TEST_CASE("transport mean from the reference hop law", "[renewal_transport]") {
    auto r = flow_relations(0.03, 5.0, 11.3, 1000.0);
    CHECK(r.lambda == Approx(0.006).epsilon(1e-14));
    CHECK(r.mean_D == Approx(56.5).epsilon(1e-14));
    CHECK(r.population_nd == Approx(339.0).epsilon(1e-13));
    CHECK(std::abs(r.population_nd - r.population_nt) < 1e-10);

    auto unit = flow_relations(0.02, 1.0, 3.0, 10.0);
    CHECK(unit.lambda == 0.02);
}

TEST_CASE("transport moment identities on random models", "[renewal_transport][property]") {
    testgen::Engine rng(32);
    for (int trial = 0; trial < 200; ++trial) {
        TransportModel model{testgen::random_pmf(rng, testgen::uniform_int(rng, 1, 40)), testgen::random_hop_model(rng)};
        auto ls = distance_stats(model.pmf);
        auto st = transport_stats(model);
        const double et = model.hop.mean_T();
        const double vt = model.hop.var_T();
        CHECK(std::abs(st.mean - ls.mean * et) <= 1e-12 * st.mean);
        CHECK(std::abs(st.second_moment - (ls.second_moment * et * et + ls.mean * vt)) <= 1e-10 * st.second_moment);
        CHECK(std::abs(st.residual_mean - st.residual_mean_decomposed) <= 1e-10 * st.residual_mean);
        CHECK(st.mgf(1.0) == Approx(1.0).epsilon(1e-12));
        CHECK(st.residual_mgf(1.0) == Approx(1.0).epsilon(1e-10));

        const double h = 1e-6;
        const double slope = (st.mgf(1.0) - st.mgf(1.0 - h)) / h;
        CHECK(std::abs(slope - st.mean) < 1e-5 * std::max(1.0, st.mean) + h * st.second_moment);

        // Residual transform matches its ratio definition away from z = 1.
        for (double z : {0.2, 0.6, 0.95}) {
            const double ratio = z * (1 - st.mgf(z)) / ((1 - z) * st.mean);
            CHECK(st.residual_mgf(z) == Approx(ratio).epsilon(1e-9));
        }
        CHECK_THROWS_AS(st.mgf(1.0 / model.hop.c()), DomainError);

        auto fr = flow_relations(model.pmf, model.hop, 1000.0);
        CHECK(std::abs(fr.population_nd - fr.population_nt) <= 1e-10 * std::max(1.0, fr.population_nt));
        CHECK(fr.mean_D == Approx(st.mean).epsilon(1e-12));
    }
}

TEST_CASE("dispersion of the path-averaged delay", "[renewal_transport]") {
    AlohaHopModel hop(0.7893, 0.1, 0.03);
    auto d1 = dispersion_varY(HopCountPmf::point_mass(1), hop);
    CHECK(d1.mean_Y == hop.mean_T());
    CHECK(d1.var_Y == Approx(hop.var_T()).epsilon(1e-15));

    auto det = dispersion_varY(HopCountPmf({0.3, 0.7}), AlohaHopModel(1.0, 0.2, 0.1));
    CHECK(det.var_Y == 0.0);

    auto wide = dispersion_varY(HopCountPmf::uniform(10000), hop);
    CHECK(wide.var_Y < hop.var_T() * 1e-3);
    double h = 0;
    for (int l = 1; l <= 10000; ++l) h += 1.0 / l;
    CHECK(wide.var_Y == Approx(hop.var_T() * h / 10000).epsilon(1e-12));
}

TEST_CASE("convolution oracle basics", "[renewal_transport][oracle]") {
    auto d = transport_pmf_oracle(HopCountPmf::point_mass(2), point_delay(3));
    CHECK(d.at(6) == Approx(1.0).epsilon(1e-15));
    CHECK(d.placed_mass() == Approx(1.0).epsilon(1e-15));
    CHECK(d.residual_tail == Approx(0.0).margin(1e-15));

    DelayPmf leaky = point_delay(1);
    leaky.masses = {0.9};
    leaky.residual_tail = 0.1;
    CHECK_THROWS_AS(transport_pmf_oracle(HopCountPmf({1.0}), leaky), PrecisionError);

    // Support cap forces lost mass past the precision limit.
    OracleOptions tight;
    tight.support_cap = 3;
    CHECK_THROWS_AS(transport_pmf_oracle(HopCountPmf::point_mass(2), point_delay(3), tight), PrecisionError);
}

TEST_CASE("convolution oracle moments for the reference model", "[renewal_transport][oracle]") {
    AlohaHopModel hop(0.7893, 0.1, 0.03);
    auto pmf = HopCountPmf::geometric(0.2);
    auto hop_pmf = perhop_pmf(hop);
    auto d = transport_pmf_oracle(pmf, hop_pmf);
    CHECK(std::abs(d.placed_mass() + d.residual_tail - 1.0) < 1e-10);
    auto st = transport_stats({pmf, hop});
    CHECK(std::abs(d.moment(1) - st.mean) < 1e-6);
    CHECK(std::abs(d.moment(2) - st.second_moment) < 1e-5 * st.second_moment);
}

TEST_CASE("convolution oracle mass accounting on random inputs", "[renewal_transport][oracle][property]") {
    testgen::Engine rng(33);
    for (int trial = 0; trial < 40; ++trial) {
        auto pmf = testgen::random_pmf(rng, testgen::uniform_int(rng, 1, 20));
        auto hop = testgen::random_hop_model(rng);
        auto d = transport_pmf_oracle(pmf, perhop_pmf(hop));
        CHECK(std::abs(d.placed_mass() + d.residual_tail - 1.0) < 1e-10);
        for (double m : d.masses) CHECK(m >= 0.0);
    }
}

TEST_CASE("exceedance oracle against enumeration", "[renewal_transport][oracle]") {
    testgen::Engine rng(34);
    for (int trial = 0; trial < 30; ++trial) {
        auto pmf = testgen::random_pmf(rng, testgen::uniform_int(rng, 1, 5));
        DelayPmf hop;
        hop.offset = 1;
        std::vector<double> w(static_cast<std::size_t>(testgen::uniform_int(rng, 1, 6)));
        double total = 0;
        for (auto& x : w) total += (x = testgen::uniform(rng, 0.05, 1.0));
        for (auto& x : w) x /= total;
        hop.masses = w;
        for (double x : {1.0, 1.3, 2.0, 2.5, 3.7}) {
            auto b = transport_exceedance_oracle(pmf, hop, x);
            const double exact = enumerate_exceedance(pmf, hop, x);
            CHECK(b.lo <= exact + 1e-14);
            CHECK(b.hi >= exact - 1e-14);
            CHECK(b.hi - b.lo < 1e-9);
        }
    }
}

TEST_CASE("exceedance oracle agrees with the pmf oracle", "[renewal_transport][oracle]") {
    AlohaHopModel hop(0.7893, 0.1, 0.03);
    auto pmf = HopCountPmf::geometric(0.3);
    auto hop_pmf = perhop_pmf(hop);
    auto d = transport_pmf_oracle(pmf, hop_pmf);
    // With L fixed the event D > L x is a plain tail of D; use a point mass so the
    // two oracles are directly comparable.
    auto fixed = HopCountPmf::point_mass(3);
    auto d3 = transport_pmf_oracle(fixed, hop_pmf);
    for (double x : {2.0, 5.0, 9.5, 20.0}) {
        const auto threshold = static_cast<long>(std::floor(3 * x));
        double tail = d3.residual_tail;
        for (long k = threshold + 1; k <= d3.last(); ++k) tail += d3.at(k);
        auto b = transport_exceedance_oracle(fixed, hop_pmf, x);
        CHECK(b.lo <= tail + 1e-12);
        CHECK(b.hi >= tail - d3.residual_tail - 1e-12);
    }
    CHECK(d.placed_mass() > 1 - 1e-9);
}
