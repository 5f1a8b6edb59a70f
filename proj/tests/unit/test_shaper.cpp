#include "catch_amalgamated.hpp"

#include "generators.hpp"
#include "mrnet/errors.hpp"
#include "mrnet/shaper.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace mrnet;
using Catch::Approx;

namespace {

// Every window checked directly, O(T^2); single-bucket traces only.
double brute_window_excess(const ShaperTrace& tr) {
    const long n = tr.slots;
    const int k = tr.classes;
    double worst = -1e300;
    for (long t = 0; t < n; ++t) {
        const double a = t == 0 ? tr.initial_tokens[0] : tr.tokens_after[t - 1];
        double used = 0.0;
        for (long s = t; s < n; ++s) {
            for (int l = 1; l <= k; ++l) used += double(l) * tr.conformed[s * k + l - 1];
            worst = std::max(worst, used - a - tr.bucket_rates[0] * double(s - t + 1));
        }
    }
    return worst;
}

long total(const std::vector<std::uint32_t>& v) {
    long s = 0;
    for (auto x : v) s += x;
    return s;
}

}  // namespace

TEST_CASE("offer mechanics", "[shaper]") {
    TokenBucket full(1.0, 5.0);
    CHECK(full.offer(3) == OfferOutcome::kConformed);
    CHECK(full.tokens() == 2.0);
    CHECK(full.offer(7) == OfferOutcome::kOversize);
    CHECK(full.tokens() == 2.0);

    // Two tokens, three needed: waits one refill.
    CHECK(full.offer(3) == OfferOutcome::kQueued);
    auto released = full.tick();
    REQUIRE(released.size() == 1);
    CHECK(released[0] == 3);
    CHECK(full.tokens() == 0.0);

    // FIFO: a small packet cannot overtake a waiting large one.
    TokenBucket fifo(1.0, 5.0, 0.0);
    CHECK(fifo.offer(4) == OfferOutcome::kQueued);
    CHECK(fifo.offer(1) == OfferOutcome::kQueued);
    CHECK(fifo.tick().empty());
    fifo.tick();
    fifo.tick();
    auto both = fifo.tick();
    REQUIRE(both.size() == 1);
    CHECK(both[0] == 4);
    CHECK(fifo.tick() == std::vector<int>{1});

    TokenBucket drop(1.0, 5.0, 1.0);
    drop.set_drop_mode(true);
    CHECK(drop.offer(3) == OfferOutcome::kDropped);
    CHECK(drop.queued() == 0);
    CHECK_THROWS_AS(drop.offer(0), std::invalid_argument);
}

TEST_CASE("tick refills up to the size", "[shaper]") {
    TokenBucket b(1.0, 5.0);
    b.tick();
    CHECK(b.tokens() == 5.0);
    TokenBucket half(0.5, 5.0, 0.0);
    half.tick();
    CHECK(half.tokens() == 0.5);
    CHECK_THROWS_AS(TokenBucket(0.0, 5.0), std::invalid_argument);
    CHECK_THROWS_AS(TokenBucket(1.0, 5.0, 6.0), std::invalid_argument);
}

TEST_CASE("oversize exactly when hops exceed the size", "[shaper][property]") {
    testgen::Engine rng(71);
    for (int trial = 0; trial < 200; ++trial) {
        const double size = testgen::uniform(rng, 1.0, 12.0);
        TokenBucket b(testgen::uniform(rng, 0.1, 3.0), size, testgen::uniform(rng, 0.0, size));
        for (int i = 0; i < 30; ++i) {
            const int hops = testgen::uniform_int(rng, 1, 15);
            const auto out = b.offer(hops);
            CHECK((out == OfferOutcome::kOversize) == (hops > size));
            if (i % 3 == 0) b.tick();
        }
    }
}

TEST_CASE("bucket sizing", "[shaper]") {
    auto ray = bucket_sizing(ScalingLaw{RayleighLaw{1.0}}, std::exp(-6.0));
    CHECK(ray.b_max / ray.b_min == Approx(2.0 * std::sqrt(6.0 / std::numbers::pi)).epsilon(1e-10));
    CHECK(ray.b_max / ray.b_min == Approx(2.76).margin(0.01));
    auto ray5 = bucket_sizing(ScalingLaw{RayleighLaw{5.0}}, std::exp(-6.0));
    CHECK(ray5.b_max / ray5.b_min == Approx(ray.b_max / ray.b_min).epsilon(1e-10));

    auto point = bucket_sizing(HopCountPmf::point_mass(7), 0.01);
    CHECK(point.b_min == 7.0);
    CHECK(point.b_max == 7.0);

    CHECK(bucket_sizing(ScalingLaw{GeometricLaw{0.2}}, 0.01).b_max == 21.0);
    CHECK(bucket_sizing(HopCountPmf::geometric(0.2), 0.01).b_max == 21.0);
    CHECK(bucket_sizing(HopCountPmf::geometric(0.2), 0.01).b_min == Approx(5.0).epsilon(1e-9));

    // Exponential law alpha = 0: tail e^{-beta x}.
    auto ex = bucket_sizing(ScalingLaw{ExponentialLaw{0.0, 0.5}}, 1e-3);
    CHECK(ex.b_max == Approx(-std::log(1e-3) / 0.5).epsilon(1e-10));

    CHECK_THROWS_AS(bucket_sizing(ScalingLaw{PowerLaw{-1.5, 1.0}}, 0.01), DomainError);
    CHECK_THROWS_AS(bucket_sizing(HopCountPmf::uniform(4), 0.0), DomainError);
    CHECK_THROWS_AS(bucket_sizing(HopCountPmf::uniform(4), 1.0), DomainError);
}

TEST_CASE("sizing threshold is the smallest with tail below epsilon", "[shaper][property]") {
    testgen::Engine rng(72);
    for (int trial = 0; trial < 200; ++trial) {
        auto pmf = testgen::random_pmf(rng, testgen::uniform_int(rng, 1, 40));
        const double eps = testgen::uniform(rng, 1e-4, 0.5);
        const auto m = static_cast<int>(bucket_sizing(pmf, eps).b_max);
        double tail = 0.0;
        for (int l = m + 1; l <= pmf.phi(); ++l) tail += pmf(l);
        CHECK(tail <= eps);
        if (m > 0) CHECK(tail + pmf(m) > eps);
    }
}

TEST_CASE("window inequality matches the brute-force check", "[shaper][oracle]") {
    testgen::Engine rng(73);
    for (int trial = 0; trial < 30; ++trial) {
        auto pmf = testgen::random_pmf(rng, testgen::uniform_int(rng, 1, 6));
        const double size = testgen::uniform(rng, 6.0, 15.0);
        TokenBucket b(testgen::uniform(rng, 0.2, 3.0), size, testgen::uniform(rng, 0.0, size));
        const double arrival = trial % 2 ? 1.0 : testgen::uniform(rng, 0.1, 0.9);
        auto tr = run_single(b, pmf, arrival, 400, 1000 + trial);
        const double fast = max_window_excess(tr);
        CHECK(fast == Approx(brute_window_excess(tr)).margin(1e-9));
        CHECK(fast <= 1e-9);
    }
}

TEST_CASE("traces keep tokens in range and conserve packets", "[shaper][property]") {
    testgen::Engine rng(74);
    for (int trial = 0; trial < 10; ++trial) {
        auto pmf = testgen::random_pmf(rng, testgen::uniform_int(rng, 1, 10));
        const double size = testgen::uniform(rng, 4.0, 12.0);
        TokenBucket b(testgen::uniform(rng, 0.3, 2.0), size);
        ShaperOptions opt;
        opt.drop_nonconforming = trial % 3 == 0;
        auto tr = run_single(b, pmf, testgen::uniform(rng, 0.2, 1.2), 100000, 77 + trial, opt);
        for (double v : tr.tokens_after) {
            CHECK(v >= 0.0);
            CHECK(v <= size);
        }
        CHECK(max_window_excess(tr) <= 1e-6);
        // offered = conformed + oversize + dropped + still waiting
        const long offered = total(tr.offered), conformed = total(tr.conformed);
        CHECK(offered >= conformed + tr.oversize + tr.dropped);
        CHECK(offered - conformed - tr.oversize - tr.dropped <= 100000);
    }
}

TEST_CASE("long-run admitted workload respects r + b / tau", "[shaper]") {
    const double r = 1.3, size = 8.0;
    auto tr = run_single(TokenBucket(r, size), HopCountPmf::uniform(5), 1.0, 1000000, 5);
    for (long tau : {1000L, 10000L, 100000L}) {
        CHECK(max_window_rate(tr, tau) <= r + size / tau + 1e-9);
    }
    CHECK(tr.measured_workload <= r + size / 1e6);
    CHECK(tr.measured_workload == Approx(r).epsilon(1e-3));
}

TEST_CASE("parallel shaping patterns under saturation", "[shaper]") {
    const double theta = 0.4;
    const int phi = 4;
    auto eq = run_parallel(ParallelShaper::make(AllocationRule::kEqualSplit, theta, 4.0, phi), {}, 1000000, 9,
                           ShaperOptions{false, false});
    auto pr = run_parallel(ParallelShaper::make(AllocationRule::kProportionalToL, theta, 4.0, phi), {}, 1000000, 9,
                           ShaperOptions{false, false});
    for (int l = 1; l <= phi; ++l) {
        CHECK(eq.measured_lambda[l - 1] * l == Approx(eq.measured_lambda[0]).epsilon(0.05));
        CHECK(pr.measured_lambda[l - 1] == Approx(pr.measured_lambda[0]).epsilon(0.05));
    }
    CHECK(eq.measured_lambda_total >= pr.measured_lambda_total);
    CHECK(eq.measured_workload == Approx(theta).epsilon(1e-3));
    CHECK(pr.measured_workload == Approx(theta).epsilon(1e-3));

    auto rates = ParallelShaper::make(AllocationRule::kProportionalToL, theta, 4.0, 7);
    double sum = 0.0;
    for (auto& b : rates.buckets) sum += b.rate();
    CHECK(std::abs(sum - theta) < 1e-12);
}

TEST_CASE("parallel traces satisfy every window", "[shaper][property]") {
    for (auto rule : {AllocationRule::kEqualSplit, AllocationRule::kProportionalToL}) {
        auto tr = run_parallel(ParallelShaper::make(rule, 0.7, 6.0, 5), {}, 100000, 3);
        CHECK(max_window_excess(tr) <= 1e-6);
        ClassArrivals bern{false, {0.3, 0.1, 0.05, 0.05, 0.02}};
        auto tb = run_parallel(ParallelShaper::make(rule, 0.7, 6.0, 5), bern, 100000, 4);
        CHECK(max_window_excess(tb) <= 1e-6);
        CHECK_THROWS_AS(run_parallel(ParallelShaper::make(rule, 0.7, 4.0, 5), {}, 10, 1), std::invalid_argument);
    }
}

TEST_CASE("shaper runs are deterministic and export CSV", "[shaper]") {
    auto a = run_single(TokenBucket(0.8, 6.0), HopCountPmf::uniform(3), 0.5, 500, 42);
    auto b = run_single(TokenBucket(0.8, 6.0), HopCountPmf::uniform(3), 0.5, 500, 42);
    CHECK(a.conformed == b.conformed);
    CHECK(a.tokens_after == b.tokens_after);
    auto c = run_single(TokenBucket(0.8, 6.0), HopCountPmf::uniform(3), 0.5, 500, 43);
    CHECK(a.offered != c.offered);

    const auto csv = trace_csv(a);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "slot,class,offered,conformed,tokens");
    long rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 500 * 3);
}
