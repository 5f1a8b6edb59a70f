#include "mrnet/shaper.hpp"

#include "mrnet/errors.hpp"
#include "mrnet/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <variant>

namespace mrnet {

namespace {

// Token arithmetic with fractional refill accumulates rounding; a packet that needs
// L tokens is admitted once the level is within this slack of L.
constexpr double kTokenSlack = 1e-9;

void check_epsilon(double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("bucket_sizing: epsilon must lie in (0, 1)");
}

double sizing_mean(const ScalingLaw& law) {
    auto st = scaling_law_stats(law);
    if (!st.mean) throw DomainError("bucket_sizing: the law has no finite mean");
    return *st.mean;
}

}  // namespace

TokenBucket::TokenBucket(double rate, double size) : TokenBucket(rate, size, size) {}

TokenBucket::TokenBucket(double rate, double size, double initial_tokens)
    : rate_(rate), size_(size), tokens_(initial_tokens) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("TokenBucket: rate must be positive");
    if (!(size > 0.0) || !std::isfinite(size)) throw std::invalid_argument("TokenBucket: size must be positive");
    if (!(initial_tokens >= 0.0 && initial_tokens <= size))
        throw std::invalid_argument("TokenBucket: initial tokens must lie in [0, size]");
}

bool TokenBucket::try_consume(int hops) noexcept {
    if (tokens_ + kTokenSlack < hops) return false;
    tokens_ = std::max(0.0, tokens_ - hops);
    return true;
}

OfferOutcome TokenBucket::offer(int hops) {
    if (hops < 1) throw std::invalid_argument("TokenBucket::offer: hop count must be at least 1");
    if (hops > size_ + kTokenSlack) return OfferOutcome::kOversize;
    if (queue_.empty() && try_consume(hops)) return OfferOutcome::kConformed;
    if (drop_mode_) return OfferOutcome::kDropped;
    queue_.push_back(hops);
    return OfferOutcome::kQueued;
}

std::vector<int> TokenBucket::tick() {
    tokens_ = std::min(size_, tokens_ + rate_);
    std::vector<int> released;
    while (!queue_.empty() && try_consume(queue_.front())) {
        released.push_back(queue_.front());
        queue_.pop_front();
    }
    return released;
}

BucketSizing bucket_sizing(const HopCountPmf& pmf, double epsilon) {
    check_epsilon(epsilon);
    const auto probs = pmf.probs();
    // tail[m] = Pr{L > m}, summed from the top to avoid cancellation.
    std::vector<double> tail(probs.size() + 1, 0.0);
    for (std::size_t m = probs.size(); m-- > 0;) tail[m] = tail[m + 1] + probs[m];
    std::size_t m = 0;
    while (tail[m] > epsilon) ++m;
    return {distance_stats(pmf).mean, static_cast<double>(m)};
}

BucketSizing bucket_sizing(const ScalingLaw& law, double epsilon) {
    check_epsilon(epsilon);
    validate(law);
    if (const auto* geo = std::get_if<GeometricLaw>(&law)) {
        // Pr{L > m} = (1-g)^m.
        double m = std::ceil(std::log(epsilon) / std::log1p(-geo->g));
        while (m > 1 && std::pow(1.0 - geo->g, m - 1) <= epsilon) m -= 1;
        while (std::pow(1.0 - geo->g, m) > epsilon) m += 1;
        return {1.0 / geo->g, std::max(m, 1.0)};
    }
    const double mean = sizing_mean(law);
    auto survival = [&](double x) { return 1.0 - scaling_law_cdf(law, x); };
    double lo = 0.0, hi = std::max(1.0, mean);
    while (survival(hi) > epsilon) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw NumericError("bucket_sizing: threshold search diverged");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (survival(mid) > epsilon ? lo : hi) = mid;
    }
    return {mean, hi};
}

ParallelShaper ParallelShaper::make(AllocationRule rule, double total_rate, double size, int phi) {
    if (phi < 1) throw std::invalid_argument("ParallelShaper: phi must be at least 1");
    ParallelShaper s;
    s.rule = rule;
    s.total_rate = total_rate;
    const double weight_sum = phi * (phi + 1.0) / 2.0;
    for (int l = 1; l <= phi; ++l) {
        const double r = rule == AllocationRule::kEqualSplit ? total_rate / phi : total_rate * l / weight_sum;
        s.buckets.emplace_back(r, size);
    }
    return s;
}

namespace {

struct Recorder {
    ShaperTrace& trace;
    bool record;
    std::vector<long> conformed_total;

    void begin(long slots, int classes, const std::vector<TokenBucket*>& buckets) {
        trace.slots = slots;
        trace.classes = classes;
        trace.buckets = static_cast<int>(buckets.size());
        for (auto* b : buckets) {
            trace.bucket_rates.push_back(b->rate());
            trace.initial_tokens.push_back(b->tokens());
        }
        conformed_total.assign(classes, 0);
        if (record) {
            trace.offered.assign(static_cast<std::size_t>(slots) * classes, 0);
            trace.conformed.assign(static_cast<std::size_t>(slots) * classes, 0);
            trace.tokens_after.assign(static_cast<std::size_t>(slots) * buckets.size(), 0.0);
        }
    }
    void offered(long t, int hops) {
        if (record) ++trace.offered[static_cast<std::size_t>(t) * trace.classes + hops - 1];
    }
    void conformed(long t, int hops) {
        ++conformed_total[hops - 1];
        if (record) ++trace.conformed[static_cast<std::size_t>(t) * trace.classes + hops - 1];
    }
    void tokens(long t, int bucket, double level) {
        if (record) trace.tokens_after[static_cast<std::size_t>(t) * trace.buckets + bucket] = level;
    }
    void finish() {
        trace.measured_lambda.assign(trace.classes, 0.0);
        for (int l = 1; l <= trace.classes; ++l) {
            const double lam = static_cast<double>(conformed_total[l - 1]) / trace.slots;
            trace.measured_lambda[l - 1] = lam;
            trace.measured_lambda_total += lam;
            trace.measured_workload += l * lam;
        }
    }
};

// One slot of one bucket: refill and release, then the new arrivals.
template <class Draw>
void step_bucket(TokenBucket& bucket, long t, int index, bool saturated, double arrival_prob, Draw&& draw,
                 CounterRng& rng, Recorder& rec) {
    for (int hops : bucket.tick()) rec.conformed(t, hops);
    auto offer_one = [&](int hops) {
        rec.offered(t, hops);
        switch (bucket.offer(hops)) {
            case OfferOutcome::kConformed: rec.conformed(t, hops); return true;
            case OfferOutcome::kOversize: ++rec.trace.oversize; return true;
            case OfferOutcome::kDropped: ++rec.trace.dropped; return false;
            case OfferOutcome::kQueued: return false;
        }
        return false;
    };
    if (saturated) {
        // An infinite backlog: keep offering until a packet has to wait.
        while (bucket.queued() == 0) {
            if (!offer_one(draw(rng))) break;
        }
    } else if (rng.bernoulli(arrival_prob)) {
        offer_one(draw(rng));
    }
    rec.tokens(t, index, bucket.tokens());
}

}  // namespace

ShaperTrace run_single(TokenBucket bucket, const HopCountPmf& pmf, double arrival_prob, long slots,
                       std::uint64_t seed, const ShaperOptions& options) {
    if (slots < 1) throw std::invalid_argument("run_single: slots must be at least 1");
    if (!(arrival_prob >= 0.0)) throw std::invalid_argument("run_single: arrival probability must be non-negative");
    if (bucket.size() < 1.0 && !options.drop_nonconforming)
        throw std::invalid_argument("run_single: bucket smaller than one token can admit nothing");
    bucket.set_drop_mode(options.drop_nonconforming);
    ShaperTrace trace;
    Recorder rec{trace, options.record_trace, {}};
    rec.begin(slots, pmf.phi(), {&bucket});
    CounterRng rng(seed, 0);
    const DiscreteSampler sampler(pmf.probs(), 1);
    auto draw = [&](CounterRng& g) { return static_cast<int>(sampler(g)); };
    const bool saturated = arrival_prob >= 1.0;
    // A saturated stream whose every packet is oversize would spin forever.
    if (saturated) {
        double admissible = 0.0;
        for (int l = 1; l <= pmf.phi() && l <= bucket.size() + kTokenSlack; ++l) admissible += pmf(l);
        if (admissible <= 0.0) throw std::invalid_argument("run_single: every packet is oversize");
    }
    for (long t = 0; t < slots; ++t) step_bucket(bucket, t, 0, saturated, arrival_prob, draw, rng, rec);
    rec.finish();
    return trace;
}

ShaperTrace run_parallel(ParallelShaper shaper, const ClassArrivals& arrivals, long slots, std::uint64_t seed,
                         const ShaperOptions& options) {
    if (slots < 1) throw std::invalid_argument("run_parallel: slots must be at least 1");
    const int phi = shaper.phi();
    if (phi < 1) throw std::invalid_argument("run_parallel: no buckets");
    if (!arrivals.saturated && static_cast<int>(arrivals.probs.size()) != phi)
        throw std::invalid_argument("run_parallel: need one arrival probability per class");
    std::vector<TokenBucket*> ptrs;
    for (int l = 1; l <= phi; ++l) {
        auto& b = shaper.buckets[l - 1];
        if (arrivals.saturated && l > b.size() + kTokenSlack)
            throw std::invalid_argument(fmt::format("run_parallel: class {} is oversize for its bucket", l));
        b.set_drop_mode(options.drop_nonconforming);
        ptrs.push_back(&b);
    }
    ShaperTrace trace;
    Recorder rec{trace, options.record_trace, {}};
    rec.begin(slots, phi, ptrs);
    std::vector<CounterRng> rngs;
    for (int l = 1; l <= phi; ++l) rngs.emplace_back(seed, static_cast<std::uint64_t>(l));
    for (long t = 0; t < slots; ++t) {
        for (int l = 1; l <= phi; ++l) {
            const double prob = arrivals.saturated ? 1.0 : arrivals.probs[l - 1];
            step_bucket(shaper.buckets[l - 1], t, l - 1, arrivals.saturated, prob, [l](CounterRng&) { return l; },
                        rngs[l - 1], rec);
        }
    }
    rec.finish();
    return trace;
}

namespace {

// max over t < s of (C(s) - r s) - (C(t) - r t) - a(t), with C the prefix sum of use.
double window_excess(const std::vector<double>& use, const std::vector<double>& a_before, double r) {
    const std::size_t n = use.size();
    std::vector<double> g(n + 1, 0.0);
    double c = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        c += use[s];
        g[s + 1] = c - r * static_cast<double>(s + 1);
    }
    double best = -std::numeric_limits<double>::infinity();
    double suffix_max = -std::numeric_limits<double>::infinity();
    for (std::size_t t = n; t-- > 0;) {
        suffix_max = std::max(suffix_max, g[t + 1]);
        best = std::max(best, suffix_max - g[t] - a_before[t]);
    }
    return best;
}

}  // namespace

double max_window_excess(const ShaperTrace& trace) {
    if (!trace.recorded()) throw std::invalid_argument("max_window_excess: trace was not recorded");
    const auto n = static_cast<std::size_t>(trace.slots);
    const int k = trace.classes;
    const int nb = trace.buckets;
    auto bucket_of = [&](int l) { return nb == 1 ? 0 : l - 1; };

    std::vector<std::vector<double>> use(nb, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> a(nb, std::vector<double>(n, 0.0));
    for (std::size_t t = 0; t < n; ++t) {
        for (int l = 1; l <= k; ++l) use[bucket_of(l)][t] += static_cast<double>(l) * trace.conformed[t * k + l - 1];
        for (int b = 0; b < nb; ++b) a[b][t] = t == 0 ? trace.initial_tokens[b] : trace.tokens_after[(t - 1) * nb + b];
    }
    double worst = -std::numeric_limits<double>::infinity();
    std::vector<double> use_all(n, 0.0), a_all(n, 0.0);
    double r_all = 0.0;
    for (int b = 0; b < nb; ++b) {
        worst = std::max(worst, window_excess(use[b], a[b], trace.bucket_rates[b]));
        for (std::size_t t = 0; t < n; ++t) {
            use_all[t] += use[b][t];
            a_all[t] += a[b][t];
        }
        r_all += trace.bucket_rates[b];
    }
    if (nb > 1) worst = std::max(worst, window_excess(use_all, a_all, r_all));
    return worst;
}

double max_window_rate(const ShaperTrace& trace, long tau) {
    if (!trace.recorded()) throw std::invalid_argument("max_window_rate: trace was not recorded");
    if (tau < 1 || tau > trace.slots) throw std::invalid_argument("max_window_rate: tau outside [1, slots]");
    const auto n = static_cast<std::size_t>(trace.slots);
    const int k = trace.classes;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        double hops = 0.0;
        for (int l = 1; l <= k; ++l) hops += static_cast<double>(l) * trace.conformed[t * k + l - 1];
        prefix[t + 1] = prefix[t] + hops;
    }
    double best = 0.0;
    for (std::size_t t = static_cast<std::size_t>(tau); t <= n; ++t) best = std::max(best, prefix[t] - prefix[t - tau]);
    return best / static_cast<double>(tau);
}

std::string trace_csv(const ShaperTrace& trace) {
    if (!trace.recorded()) throw std::invalid_argument("trace_csv: trace was not recorded");
    std::string out = "slot,class,offered,conformed,tokens\n";
    auto it = std::back_inserter(out);
    const int k = trace.classes;
    for (long t = 0; t < trace.slots; ++t) {
        for (int l = 1; l <= k; ++l) {
            const auto i = static_cast<std::size_t>(t) * k + l - 1;
            const int b = trace.buckets == 1 ? 0 : l - 1;
            fmt::format_to(it, "{},{},{},{},{:.12g}\n", t, l, trace.offered[i], trace.conformed[i],
                           trace.tokens_after[static_cast<std::size_t>(t) * trace.buckets + b]);
        }
    }
    return out;
}

}  // namespace mrnet
