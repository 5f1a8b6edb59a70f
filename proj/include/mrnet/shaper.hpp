#pragma once

// Leaky-bucket admission at the network edge: an L-hop packet needs L tokens. Covers a
// single bucket, bucket sizing from the hop-count law, and one bucket per hop class.

#include "mrnet/sd_distance.hpp"

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

namespace mrnet {

enum class OfferOutcome { kConformed, kQueued, kOversize, kDropped };

/// Token bucket with real-valued tokens. Each slot refills first, then tests.
class TokenBucket {
public:
    /// Starts full unless `initial_tokens` is given. Throws std::invalid_argument
    /// unless rate > 0, size > 0 and 0 <= initial_tokens <= size.
    TokenBucket(double rate, double size);
    TokenBucket(double rate, double size, double initial_tokens);

    /// Admits an L-hop packet now if the queue is empty and L tokens are available;
    /// otherwise queues it FIFO, or drops it in drop mode. L > size is oversize and
    /// never admitted. Throws std::invalid_argument for L < 1.
    OfferOutcome offer(int hops);

    /// tokens = min(size, tokens + rate), then releases queued packets from the head
    /// while they fit. Returns the hop counts released, in order.
    std::vector<int> tick();

    void set_drop_mode(bool drop) noexcept { drop_mode_ = drop; }

    [[nodiscard]] double rate() const noexcept { return rate_; }
    [[nodiscard]] double size() const noexcept { return size_; }
    [[nodiscard]] double tokens() const noexcept { return tokens_; }
    [[nodiscard]] std::size_t queued() const noexcept { return queue_.size(); }
    [[nodiscard]] const std::deque<int>& queue() const noexcept { return queue_; }

private:
    bool try_consume(int hops) noexcept;

    double rate_;
    double size_;
    double tokens_;
    bool drop_mode_ = false;
    std::deque<int> queue_;
};

struct BucketSizing {
    double b_min = 0.0;  ///< E[L]
    double b_max = 0.0;  ///< L_m, smallest threshold with Pr{L > L_m} <= epsilon
};

/// Integer threshold on the pmf support. Throws DomainError unless 0 < epsilon < 1.
BucketSizing bucket_sizing(const HopCountPmf& pmf, double epsilon);
/// Continuous threshold from the law's CDF (integer threshold for the geometric law).
/// Throws DomainError when the law's mean diverges.
BucketSizing bucket_sizing(const ScalingLaw& law, double epsilon);

enum class AllocationRule { kEqualSplit, kProportionalToL };

/// One bucket per hop class l = 1..phi sharing a total token rate.
struct ParallelShaper {
    AllocationRule rule = AllocationRule::kEqualSplit;
    double total_rate = 1.0;
    std::vector<TokenBucket> buckets;

    /// Equal split gives every bucket total_rate / phi; proportional gives bucket l
    /// total_rate * l / (phi (phi + 1) / 2). Every bucket has size `size`.
    static ParallelShaper make(AllocationRule rule, double total_rate, double size, int phi);
    [[nodiscard]] int phi() const noexcept { return static_cast<int>(buckets.size()); }
};

/// Per-class input: saturated (a packet always waiting) or Bernoulli per slot.
struct ClassArrivals {
    bool saturated = true;
    std::vector<double> probs;  ///< Bernoulli probability per class when not saturated
};

struct ShaperOptions {
    bool record_trace = true;
    bool drop_nonconforming = false;
};

/// Row-major per-slot records: offered and conformed at slot * classes + (class - 1),
/// bucket levels after the slot at slot * buckets + bucket. A single-bucket trace has
/// one bucket shared by every class.
struct ShaperTrace {
    long slots = 0;
    int classes = 0;
    int buckets = 0;
    std::vector<double> bucket_rates;
    std::vector<double> initial_tokens;
    std::vector<std::uint32_t> offered;
    std::vector<std::uint32_t> conformed;
    std::vector<double> tokens_after;

    std::vector<double> measured_lambda;  ///< conformed packets of class l per slot
    double measured_lambda_total = 0.0;
    double measured_workload = 0.0;  ///< sum_l l * lambda(l), hops admitted per slot
    long oversize = 0;
    long dropped = 0;

    [[nodiscard]] bool recorded() const noexcept { return !conformed.empty(); }
};

/// Single bucket fed by one stream: every slot a packet arrives with probability
/// `arrival_prob` (saturated when >= 1 keeps one head packet always waiting), its hop
/// count drawn from `pmf`. The trace has one class column per hop count.
ShaperTrace run_single(TokenBucket bucket, const HopCountPmf& pmf, double arrival_prob, long slots,
                       std::uint64_t seed, const ShaperOptions& options = {});

/// Parallel buckets; class l packets feed bucket l.
ShaperTrace run_parallel(ParallelShaper shaper, const ClassArrivals& arrivals, long slots, std::uint64_t seed,
                         const ShaperOptions& options = {});

/// Largest excess of admitted hops over a(t) + r * tau across every window [t, t + tau)
/// of a recorded trace, where a(t) is the token level entering slot t. Checked per
/// bucket and for the aggregate; non-positive means every window conforms.
/// O(slots * classes).
double max_window_excess(const ShaperTrace& trace);

/// Largest hops admitted per slot over any window of length tau.
double max_window_rate(const ShaperTrace& trace, long tau);

/// CSV with header `slot,class,offered,conformed,tokens`.
std::string trace_csv(const ShaperTrace& trace);

}  // namespace mrnet
