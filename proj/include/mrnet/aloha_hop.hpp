#pragma once

// Per-hop delay of a buffered slotted-Aloha node, modeled as a Geo/G/1 queue whose
// service time is the number of slots until a successful transmission.

#include "mrnet/delay_pmf.hpp"
#include "mrnet/rational.hpp"
#include "mrnet/sd_distance.hpp"

#include <functional>

namespace mrnet {

/// Nodes in an area A with interference radius R around each receiver.
struct ContentionGeometry {
    double n = 1.0;       ///< node count
    double area = 1.0;    ///< A
    double radius = 1.0;  ///< R

    [[nodiscard]] double density() const noexcept { return n / area; }
    /// pi R^2 sigma, the number of nodes inside one interference range.
    [[nodiscard]] double interference_count() const noexcept;

    /// Throws std::invalid_argument unless sigma > 0, R > 0 and the count is >= 1.
    void validate() const;
};

/// Fixed-point equation for the per-attempt success probability.
enum class SuccessEquation {
    /// p = exp(-theta * n_int * p)
    kLoadTimesP,
    /// p = exp(-theta * n_int / p), the buffered-Aloha steady state; solvable only
    /// while theta * n_int <= 1/e.
    kLoadOverP,
};

struct SuccessProbability {
    double p = 1.0;
    double residual = 0.0;  ///< |p - rhs(p)| at the returned root
};

/// Largest root in (0, 1] of the chosen fixed-point equation.
/// Throws DomainError when the equation has no root in (0, 1].
SuccessProbability solve_success_probability(double theta, double n_int,
                                             SuccessEquation eq = SuccessEquation::kLoadTimesP);

/// Per-hop delay law of one node: success probability p, retransmission
/// probability q, node throughput theta.
class AlohaHopModel {
public:
    /// Throws std::invalid_argument for parameters outside 0 < p <= 1, 0 < q <= 1,
    /// 0 <= theta < 1, and UnstableQueueError when theta * E[X] >= 1.
    AlohaHopModel(double p, double q, double theta);

    [[nodiscard]] double p() const noexcept { return p_; }
    [[nodiscard]] double q() const noexcept { return q_; }
    [[nodiscard]] double theta() const noexcept { return theta_; }

    /// Probability the server is idle, 1 - theta E[X].
    [[nodiscard]] double p0() const noexcept { return p0_; }
    [[nodiscard]] double a() const noexcept { return a_; }
    [[nodiscard]] double b() const noexcept { return b_; }
    [[nodiscard]] double c() const noexcept { return c_; }
    [[nodiscard]] double beta1() const noexcept { return beta1_; }
    [[nodiscard]] double beta2() const noexcept { return beta2_; }

    [[nodiscard]] double mean_X() const noexcept { return mean_x_; }
    [[nodiscard]] double var_X() const noexcept { return var_x_; }
    [[nodiscard]] double mean_T() const noexcept { return mean_t_; }
    [[nodiscard]] double var_T() const noexcept { return var_t_; }

    /// p = 1: every attempt succeeds and T is identically one slot.
    [[nodiscard]] bool deterministic() const noexcept { return deterministic_; }

    /// M_X(z) = p z (1 - (1-q) z) / (1 - (1-pq) z).
    [[nodiscard]] const RationalFunction& service_mgf() const noexcept { return mgf_x_; }
    /// M_T(z) = p0 p z (1 - (1-q) z) / ((1-theta) - b z).
    [[nodiscard]] const RationalFunction& delay_mgf() const noexcept { return mgf_t_; }

    /// Pr{T > k} for integer k >= 0.
    [[nodiscard]] double delay_survival(long k) const noexcept;

private:
    double p_, q_, theta_;
    double p0_ = 1.0, a_ = 0.0, b_ = 0.0, c_ = 0.0, beta1_ = 1.0, beta2_ = 0.0;
    double mean_x_ = 1.0, var_x_ = 0.0, mean_t_ = 1.0, var_t_ = 0.0;
    bool deterministic_ = false;
    RationalFunction mgf_x_, mgf_t_;
};

inline AlohaHopModel build_hop_model(double p, double q, double theta) { return {p, q, theta}; }

/// Convenience: solve p from (theta, n_int) then build the model.
AlohaHopModel hop_model_from_contention(double theta, double q, double n_int,
                                        SuccessEquation eq = SuccessEquation::kLoadTimesP);

struct MgfStats {
    std::function<double(double)> mgf;
    double mean = 0.0;
    double variance = 0.0;
};

/// Service time X. The evaluator throws DomainError at or beyond the pole 1/(1-pq).
MgfStats service_stats(const AlohaHopModel& model);

/// Per-hop delay T. The evaluator throws DomainError outside 0 <= z < 1/c.
MgfStats perhop_stats(const AlohaHopModel& model);

/// Generic Geo/G/1 sojourn-time transform
/// (1 - theta E[X]) (z - 1) M_X(z) / ((z - 1) + theta (1 - M_X(z))), for z != 1.
double geo_g1_sojourn_mgf(double theta, double mean_x, const std::function<double(double)>& mgf_x, double z);

/// Smallest k with beta2 c^k < 1e-10 (1 for the deterministic law).
long default_delay_support(const AlohaHopModel& model);

/// Pr{T=1} = beta1 + beta2 (1-c), Pr{T=k} = beta2 (1-c) c^(k-1); the mass beyond
/// k_max is recorded as residual_tail. k_max <= 0 selects default_delay_support.
DelayPmf perhop_pmf(const AlohaHopModel& model, long k_max = 0);

/// Maximum node throughput under random access, e^-1 / (pi R^2 sigma).
double access_capacity(double interference_count);
double access_capacity(const ContentionGeometry& geom);

/// lambda E[L] <= access capacity.
bool check_flow(double lambda, const HopCountPmf& pmf, const ContentionGeometry& geom);

}  // namespace mrnet
