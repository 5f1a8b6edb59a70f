#pragma once

// Slot-synchronous Monte Carlo of the multihop Aloha network. Mean-field mode draws
// transmission success from a fixed coin and scatters relays uniformly; torus mode
// places nodes on a lattice and decides collisions geometrically at the receiver.
// Also a direct sampler for the transport-delay tail.

#include "mrnet/aloha_hop.hpp"
#include "mrnet/delay_pmf.hpp"
#include "mrnet/sd_distance.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mrnet {

enum class SimMode { kMeanField, kTorus };

struct SimConfig {
    SimMode mode = SimMode::kMeanField;
    long n = 200;
    HopCountPmf pmf = HopCountPmf::point_mass(1);
    double q = 0.1;
    /// New packets per node per slot (one Bernoulli draw per node and slot; the hop
    /// count comes from pmf). Ignored when saturated.
    double lambda = 0.0;
    /// Every node keeps one own packet in the network; delivery injects the next.
    bool saturated = false;

    // Mean field: success probability, explicit or solved from theta = lambda E[L].
    std::optional<double> p;
    double n_int = 10.0;
    SuccessEquation success_eq = SuccessEquation::kLoadTimesP;

    // Torus: sqrt(n) x sqrt(n) unit lattice, receiver interference radius.
    double radius = 1.6;

    long slots = 100000;
    long warmup = 10000;
    std::uint64_t seed = 1;
    /// Re-count every queue after each slot and compare with the running totals.
    bool audit = false;
    /// Keep the individual transport delays in the report.
    bool keep_delay_samples = false;

    /// Throws ConfigError on inconsistent fields.
    void validate() const;
};

struct ConfidenceValue {
    double mean = 0.0;
    double half_width = 0.0;  ///< 95% batch-means half-width; 0 when undetermined

    friend bool operator==(const ConfidenceValue&, const ConfidenceValue&) = default;
};

struct SimReport {
    SimMode mode = SimMode::kMeanField;
    double p_used = 0.0;  ///< mean field only
    long measured_slots = 0;

    ConfidenceValue theta;       ///< departures per node per slot (own + relay)
    ConfidenceValue lambda;      ///< new packets per node per slot
    double mean_L = 0.0;         ///< mean hop count of generated packets
    ConfidenceValue mean_T;      ///< per-hop delay
    ConfidenceValue mean_D;      ///< transport delay
    std::vector<long> perhop_histogram;  ///< [k] = hops that took k slots
    std::vector<long> delay_samples;     ///< filled when keep_delay_samples

    double population_time_avg = 0.0;  ///< packets in the network per node, time average
    double population_nd = 0.0;        ///< lambda_hat * E_hat[D]
    double population_nt = 0.0;        ///< theta_hat * E_hat[T]
    long max_queue = 0;

    long generated = 0;  ///< whole run, warmup included
    long delivered = 0;
    long in_network = 0;  ///< at the end of the run

    friend bool operator==(const SimReport&, const SimReport&) = default;
};

/// Throws UnstableQueueError once any queue exceeds 10^6 packets.
SimReport run_meanfield(const SimConfig& cfg);
SimReport run_torus(const SimConfig& cfg);
/// Dispatches on cfg.mode.
SimReport simulate(const SimConfig& cfg);

/// Success probability the mean-field run will use.
double meanfield_success_probability(const SimConfig& cfg);

struct TailEstimate {
    double x = 0.0;
    double probability = 0.0;
    double std_error = 0.0;
    double half_width = 0.0;  ///< 95% Wald
};

/// Pr{sum of L per-hop delays > L x}, sampling L from pmf and the delays from hop_pmf.
/// The hop pmf's residual tail is placed one slot past its last entry.
/// Throws std::invalid_argument when samples < 10^4.
std::vector<TailEstimate> estimate_tail(const HopCountPmf& pmf, const DelayPmf& hop_pmf,
                                        std::span<const double> x_grid, long samples, std::uint64_t seed);

}  // namespace mrnet
