#include "mrnet/netsim.hpp"

#include "mrnet/errors.hpp"
#include "mrnet/rng.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace mrnet {

void SimConfig::validate() const {
    if (n < 1) throw ConfigError("n must be at least 1");
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("q must lie in (0, 1]");
    if (!saturated && !(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
    if (warmup < 0 || slots <= warmup) throw ConfigError("need slots > warmup >= 0");
    if (mode == SimMode::kMeanField) {
        if (p && !(*p > 0.0 && *p <= 1.0)) throw ConfigError("p must lie in (0, 1]");
        if (!p && saturated) throw ConfigError("a saturated mean-field run needs an explicit p");
        if (!p && !(n_int > 0.0)) throw ConfigError("n_int must be positive");
    } else {
        const auto side = static_cast<long>(std::llround(std::sqrt(static_cast<double>(n))));
        if (side * side != n) throw ConfigError("torus mode needs a square node count");
        if (!(radius >= 1.0)) throw ConfigError("torus mode needs radius >= 1");
        if (!(radius < side / 2.0)) throw ConfigError("interference radius must stay below half the torus side");
        if (pmf.phi() > side / 2) throw ConfigError(fmt::format("hop counts up to {} do not fit a torus of side {}",
                                                                pmf.phi(), side));
    }
}

double meanfield_success_probability(const SimConfig& cfg) {
    if (cfg.p) return *cfg.p;
    const double theta = cfg.lambda * distance_stats(cfg.pmf).mean;
    return solve_success_probability(theta, cfg.n_int, cfg.success_eq).p;
}

namespace {

constexpr std::size_t kQueueLimit = 1000000;
constexpr int kBatches = 20;

struct Packet {
    long gen = 0;          ///< slot at whose end the packet was generated
    long hop_arrival = 0;  ///< slot at whose end it joined the current queue
    int hops = 1;
    int residual = 1;
    long source = 0;
    long dest = -1;
    bool backlogged = false;
};

struct BatchAccumulator {
    double sum = 0.0;
    long count = 0;
};

// Batch-means 95% half-width of a ratio estimator across equal slot batches.
double batch_half_width(const std::vector<BatchAccumulator>& batches) {
    std::vector<double> means;
    for (const auto& b : batches)
        if (b.count > 0) means.push_back(b.sum / static_cast<double>(b.count));
    const auto k = means.size();
    if (k < 2) return 0.0;
    double m = 0.0;
    for (double v : means) m += v;
    m /= static_cast<double>(k);
    double ss = 0.0;
    for (double v : means) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / static_cast<double>(k - 1));
    const boost::math::students_t dist(static_cast<double>(k - 1));
    return boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(static_cast<double>(k));
}

class Torus {
public:
    Torus(long side, double radius) : side_(side) {
        const long r = static_cast<long>(std::floor(radius));
        for (long dy = -r; dy <= r; ++dy)
            for (long dx = -r; dx <= r; ++dx)
                if (static_cast<double>(dx * dx + dy * dy) <= radius * radius) offsets_.emplace_back(dx, dy);
    }

    [[nodiscard]] long wrap(long v) const noexcept { return ((v % side_) + side_) % side_; }
    [[nodiscard]] long id(long x, long y) const noexcept { return wrap(y) * side_ + wrap(x); }
    // Signed shortest offset from a to b along one axis.
    [[nodiscard]] long delta(long a, long b) const noexcept {
        long d = wrap(b - a);
        if (2 * d > side_) d -= side_;
        return d;
    }

    /// Lattice neighbour closest to dest in Euclidean distance; ties go to the first
    /// of (-1,0), (0,-1), (0,1), (1,0).
    [[nodiscard]] long next_hop(long from, long dest) const noexcept {
        const long x = from % side_, y = from / side_;
        const long tx = dest % side_, ty = dest / side_;
        static constexpr long kSteps[4][2] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};
        long best = -1, best_d2 = std::numeric_limits<long>::max();
        for (const auto& s : kSteps) {
            const long dx = delta(x + s[0], tx), dy = delta(y + s[1], ty);
            const long d2 = dx * dx + dy * dy;
            if (d2 < best_d2) best_d2 = d2, best = id(x + s[0], y + s[1]);
        }
        return best;
    }

    /// Uniform point at L1 distance l (4l candidates, l <= side / 2).
    long destination(long from, int l, CounterRng& rng) const noexcept {
        const long k = static_cast<long>(rng.below(4 * static_cast<std::uint64_t>(l)));
        const long quadrant = k / l, step = k % l;
        // Walk the diamond |dx| + |dy| = l starting at (l, 0) counter-clockwise.
        long dx = 0, dy = 0;
        switch (quadrant) {
            case 0: dx = l - step, dy = step; break;
            case 1: dx = -step, dy = l - step; break;
            case 2: dx = -(l - step), dy = -step; break;
            default: dx = step, dy = -(l - step); break;
        }
        return id(from % side_ + dx, from / side_ + dy);
    }

    [[nodiscard]] const std::vector<std::pair<long, long>>& offsets() const noexcept { return offsets_; }
    [[nodiscard]] long side() const noexcept { return side_; }

private:
    long side_;
    std::vector<std::pair<long, long>> offsets_;
};

class Simulation {
public:
    explicit Simulation(const SimConfig& cfg)
        : cfg_(cfg),
          queues_(static_cast<std::size_t>(cfg.n)),
          active_pos_(static_cast<std::size_t>(cfg.n), -1),
          arrivals_rng_(cfg.seed, 1),
          channel_rng_(cfg.seed, 2),
          hop_sampler_(cfg.pmf.probs(), 1),
          measured_(cfg.slots - cfg.warmup),
          theta_b_(kBatches),
          lambda_b_(kBatches),
          t_b_(kBatches),
          d_b_(kBatches) {
        if (cfg.mode == SimMode::kTorus) {
            const auto side = static_cast<long>(std::llround(std::sqrt(static_cast<double>(cfg.n))));
            torus_.emplace(side, cfg.radius);
            tx_stamp_.assign(static_cast<std::size_t>(cfg.n), -1);
        } else {
            p_ = meanfield_success_probability(cfg);
        }
        if (!cfg.saturated && cfg.lambda > 0.0) {
            log_no_arrival_ = std::log1p(-cfg.lambda);
            next_arrival_ = draw_gap();
        }
    }

    SimReport run() {
        if (cfg_.saturated) {
            for (long i = 0; i < cfg_.n; ++i) pending_.emplace_back(i, new_packet(i, -1));
            flush_pending(-1);
        }
        for (long t = 0; t < cfg_.slots; ++t) step(t);
        return finish();
    }

private:
    Packet new_packet(long source, long t) {
        Packet pk;
        pk.gen = t;
        pk.source = source;
        pk.hops = pk.residual = static_cast<int>(hop_sampler_(arrivals_rng_));
        if (torus_) pk.dest = torus_->destination(source, pk.hops, arrivals_rng_);
        ++generated_;
        if (t >= cfg_.warmup) {
            ++gen_measured_;
            hops_measured_ += pk.hops;
            lambda_b_[batch(t)].sum += 1.0;
        }
        return pk;
    }

    long draw_gap() {
        if (cfg_.lambda >= 1.0) return 0;
        const double u = 1.0 - arrivals_rng_.uniform();  // (0, 1]
        const double g = std::floor(std::log(u) / log_no_arrival_);
        return g > 4e18 ? std::numeric_limits<long>::max() / 2 : static_cast<long>(g);
    }

    [[nodiscard]] std::size_t batch(long t) const noexcept {
        return static_cast<std::size_t>((t - cfg_.warmup) * kBatches / measured_);
    }

    void activate(long i) {
        if (active_pos_[i] >= 0) return;
        active_pos_[i] = static_cast<long>(active_.size());
        active_.push_back(i);
    }
    void deactivate(long i) {
        const long pos = active_pos_[i];
        const long last = active_.back();
        active_[pos] = last;
        active_pos_[last] = pos;
        active_.pop_back();
        active_pos_[i] = -1;
    }

    void flush_pending(long t) {
        for (auto& [node, pk] : pending_) {
            pk.hop_arrival = t;
            pk.backlogged = false;
            auto& qn = queues_[node];
            qn.push_back(pk);
            if (qn.size() > kQueueLimit)
                throw UnstableQueueError(fmt::format(
                    "queue at node {} exceeded {} packets at slot {} ({} packets in the network)", node,
                    kQueueLimit, t, generated_ - delivered_));
            max_queue_ = std::max(max_queue_, static_cast<long>(qn.size()));
            activate(node);
        }
        pending_.clear();
    }

    void step(long t) {
        const bool measure = t >= cfg_.warmup;
        // Head-of-line packets transmit: fresh ones always, backlogged ones with prob q.
        transmitters_.clear();
        for (long i : active_) {
            const Packet& head = queues_[i].front();
            if (!head.backlogged || channel_rng_.bernoulli(cfg_.q)) transmitters_.push_back(i);
        }
        std::sort(transmitters_.begin(), transmitters_.end());
        if (torus_)
            for (long i : transmitters_) tx_stamp_[i] = t;

        for (long i : transmitters_) {
            auto& qi = queues_[i];
            Packet& head = qi.front();
            long receiver = -1;
            bool ok = false;
            if (torus_) {
                receiver = torus_->next_hop(i, head.dest);
                ok = collision_free(i, receiver, t);
            } else {
                ok = channel_rng_.bernoulli(p_);
            }
            if (!ok) {
                head.backlogged = true;
                continue;
            }
            Packet pk = head;
            qi.pop_front();
            if (qi.empty()) deactivate(i);
            ++hop_completions_;
            if (pk.hop_arrival >= cfg_.warmup) {
                const long k = t - pk.hop_arrival;
                t_sum_ += static_cast<double>(k);
                ++t_count_;
                auto& tb = t_b_[batch(t)];
                tb.sum += static_cast<double>(k);
                ++tb.count;
                if (static_cast<std::size_t>(k) >= histogram_.size()) histogram_.resize(k + 1, 0);
                ++histogram_[k];
            }
            if (measure) theta_b_[batch(t)].sum += 1.0;
            if (measure) ++successes_;
            if (--pk.residual == 0) {
                deliver(pk, t);
            } else {
                const long target = torus_ ? receiver : static_cast<long>(channel_rng_.below(cfg_.n));
                pending_.emplace_back(target, pk);
            }
        }

        if (!cfg_.saturated && cfg_.lambda > 0.0) {
            const long base = t * cfg_.n;
            while (next_arrival_ < base + cfg_.n) {
                const long node = next_arrival_ - base;
                pending_.emplace_back(node, new_packet(node, t));
                next_arrival_ += 1 + draw_gap();
            }
        }
        flush_pending(t);

        const long in_net = generated_ - delivered_;
        if (measure) population_sum_ += static_cast<double>(in_net);
        if (cfg_.audit) audit(t);
    }

    bool collision_free(long sender, long receiver, long t) const noexcept {
        const long rx = receiver % torus_->side(), ry = receiver / torus_->side();
        for (const auto& [dx, dy] : torus_->offsets()) {
            const long k = torus_->id(rx + dx, ry + dy);
            if (k != sender && tx_stamp_[k] == t) return false;
        }
        return true;
    }

    void deliver(const Packet& pk, long t) {
        ++delivered_;
        if (pk.gen >= cfg_.warmup) {
            const long d = t - pk.gen;
            d_sum_ += static_cast<double>(d);
            ++d_count_;
            auto& db = d_b_[batch(t)];
            db.sum += static_cast<double>(d);
            ++db.count;
            if (cfg_.keep_delay_samples) samples_.push_back(d);
        }
        if (cfg_.saturated) pending_.emplace_back(pk.source, new_packet(pk.source, t));
    }

    void audit(long t) const {
        std::size_t total = 0, longest = 0;
        for (const auto& qn : queues_) {
            total += qn.size();
            longest = std::max(longest, qn.size());
        }
        if (static_cast<long>(total) != generated_ - delivered_)
            throw NumericError(fmt::format("packet audit failed at slot {}: {} queued, {} generated, {} delivered", t,
                                           total, generated_, delivered_));
        for (long i = 0; i < cfg_.n; ++i)
            if ((active_pos_[i] >= 0) != !queues_[i].empty())
                throw NumericError(fmt::format("active set out of sync at node {} slot {}", i, t));
    }

    SimReport finish() {
        SimReport r;
        r.mode = cfg_.mode;
        r.p_used = torus_ ? 0.0 : p_;
        r.measured_slots = measured_;
        const double node_slots = static_cast<double>(cfg_.n) * static_cast<double>(measured_);
        r.theta.mean = static_cast<double>(successes_) / node_slots;
        r.lambda.mean = static_cast<double>(gen_measured_) / node_slots;
        // Per-batch counts become rates per node and slot.
        auto rate_batches = [&](std::vector<BatchAccumulator> b) {
            for (std::size_t k = 0; k < b.size(); ++k) {
                const long lo = cfg_.warmup + static_cast<long>((measured_ * static_cast<long>(k) + kBatches - 1) / kBatches);
                const long hi = cfg_.warmup + static_cast<long>((measured_ * static_cast<long>(k + 1) + kBatches - 1) / kBatches);
                b[k].count = (hi - lo) * cfg_.n;
            }
            return batch_half_width(b);
        };
        r.theta.half_width = rate_batches(theta_b_);
        r.lambda.half_width = rate_batches(lambda_b_);
        r.mean_L = gen_measured_ > 0 ? static_cast<double>(hops_measured_) / static_cast<double>(gen_measured_) : 0.0;
        r.mean_T.mean = t_count_ > 0 ? t_sum_ / static_cast<double>(t_count_) : 0.0;
        r.mean_T.half_width = batch_half_width(t_b_);
        r.mean_D.mean = d_count_ > 0 ? d_sum_ / static_cast<double>(d_count_) : 0.0;
        r.mean_D.half_width = batch_half_width(d_b_);
        r.perhop_histogram = std::move(histogram_);
        r.delay_samples = std::move(samples_);
        r.population_time_avg = population_sum_ / node_slots;
        r.population_nd = r.lambda.mean * r.mean_D.mean;
        r.population_nt = r.theta.mean * r.mean_T.mean;
        r.generated = generated_;
        r.delivered = delivered_;
        std::size_t total = 0;
        for (const auto& qn : queues_) total += qn.size();
        r.in_network = static_cast<long>(total);
        if (r.in_network != generated_ - delivered_)
            throw NumericError("packet audit failed at the end of the run");
        r.max_queue = max_queue_;
        return r;
    }

    const SimConfig& cfg_;
    std::vector<std::deque<Packet>> queues_;
    std::vector<long> active_;
    std::vector<long> active_pos_;
    std::vector<long> transmitters_;
    std::vector<std::pair<long, Packet>> pending_;
    std::optional<Torus> torus_;
    std::vector<long> tx_stamp_;
    CounterRng arrivals_rng_;
    CounterRng channel_rng_;
    DiscreteSampler hop_sampler_;
    double p_ = 1.0;
    double log_no_arrival_ = 0.0;
    long next_arrival_ = std::numeric_limits<long>::max();

    long measured_;
    long generated_ = 0, delivered_ = 0, hop_completions_ = 0;
    long gen_measured_ = 0, hops_measured_ = 0, successes_ = 0;
    double t_sum_ = 0.0, d_sum_ = 0.0, population_sum_ = 0.0;
    long t_count_ = 0, d_count_ = 0;
    long max_queue_ = 0;
    std::vector<BatchAccumulator> theta_b_, lambda_b_, t_b_, d_b_;
    std::vector<long> histogram_;
    std::vector<long> samples_;
};

}  // namespace

SimReport run_meanfield(const SimConfig& cfg) {
    if (cfg.mode != SimMode::kMeanField) throw ConfigError("run_meanfield needs mode meanfield");
    cfg.validate();
    return Simulation(cfg).run();
}

SimReport run_torus(const SimConfig& cfg) {
    if (cfg.mode != SimMode::kTorus) throw ConfigError("run_torus needs mode torus");
    cfg.validate();
    return Simulation(cfg).run();
}

SimReport simulate(const SimConfig& cfg) {
    return cfg.mode == SimMode::kTorus ? run_torus(cfg) : run_meanfield(cfg);
}

std::vector<TailEstimate> estimate_tail(const HopCountPmf& pmf, const DelayPmf& hop_pmf,
                                        std::span<const double> x_grid, long samples, std::uint64_t seed) {
    if (samples < 10000) throw std::invalid_argument("estimate_tail: need at least 10^4 samples");
    if (hop_pmf.masses.empty()) throw std::invalid_argument("estimate_tail: empty per-hop pmf");
    std::vector<double> masses = hop_pmf.masses;
    if (hop_pmf.residual_tail > 0.0) masses.push_back(hop_pmf.residual_tail);
    const DiscreteSampler hop_count(pmf.probs(), 1);
    const DiscreteSampler delay(masses, hop_pmf.offset);
    CounterRng rng(seed, 3);
    std::vector<long> hits(x_grid.size(), 0);
    for (long s = 0; s < samples; ++s) {
        const long l = hop_count(rng);
        long total = 0;
        for (long j = 0; j < l; ++j) total += delay(rng);
        for (std::size_t i = 0; i < x_grid.size(); ++i)
            if (static_cast<double>(total) > static_cast<double>(l) * x_grid[i]) ++hits[i];
    }
    std::vector<TailEstimate> out(x_grid.size());
    const double n = static_cast<double>(samples);
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
        const double ph = static_cast<double>(hits[i]) / n;
        out[i].x = x_grid[i];
        out[i].probability = ph;
        out[i].std_error = std::sqrt(ph * (1.0 - ph) / n);
        out[i].half_width = 1.959963984540054 * out[i].std_error;
    }
    return out;
}

}  // namespace mrnet
