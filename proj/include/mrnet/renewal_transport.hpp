#pragma once

// Markov renewal view of packet transport: the residual-hop chain, transport-delay
// transforms and moments, Little's-law flow relations, and a brute-force
// convolution oracle for the transport-delay distribution.

#include "mrnet/aloha_hop.hpp"
#include "mrnet/delay_pmf.hpp"
#include "mrnet/sd_distance.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace mrnet {

/// Embedded chain on residual hops {1..phi}: from state 1 a fresh packet draws its
/// hop count, from state i >= 2 the chain steps down to i-1.
Eigen::MatrixXd transition_matrix(const HopCountPmf& pmf);

/// pi_l = sum_{i>=l} f_L(i) / E[L].
std::vector<double> embedded_limits(const HopCountPmf& pmf);

struct TransportModel {
    HopCountPmf pmf;
    AlohaHopModel hop;
};

struct TransportStats {
    std::function<double(double)> mgf;           ///< M_D(z) = M_L(M_T(z))
    std::function<double(double)> residual_mgf;  ///< M_D^(z)
    double mean = 0.0;                           ///< E[L] E[T]
    double second_moment = 0.0;                  ///< E[L^2] E[T]^2 + E[L] var[T]
    double variance = 0.0;
    double residual_mean = 0.0;             ///< (E[D^2] + E[D]) / (2 E[D])
    double residual_mean_decomposed = 0.0;  ///< same quantity assembled from L and T moments
};

/// Both evaluators throw DomainError outside 0 <= z < 1/c.
TransportStats transport_stats(const TransportModel& model);

struct FlowRelations {
    double lambda = 0.0;      ///< theta / E[L]
    double mean_D = 0.0;      ///< theta E[T] / lambda
    double population_nd = 0.0;  ///< n lambda E[D]
    double population_nt = 0.0;  ///< n theta E[T]
};

FlowRelations flow_relations(double theta, double mean_L, double mean_T, double n);
/// Uses the node throughput stored in the hop model.
FlowRelations flow_relations(const HopCountPmf& pmf, const AlohaHopModel& hop, double n);

/// Y = D / L, the per-hop delay averaged along a path.
struct Dispersion {
    double mean_Y = 0.0;
    double var_Y = 0.0;
};

Dispersion dispersion_varY(const HopCountPmf& pmf, const AlohaHopModel& hop);

// ---------------------------------------------------------------------------
// Convolution oracle

struct OracleOptions {
    long support_cap = 100'000;      ///< largest delay value kept
    double max_lost_mass = 1e-6;     ///< PrecisionError above this
    double trim_threshold = 1e-40;   ///< edge masses below this are dropped (and accounted)
};

/// Mixture over l of the l-fold self-convolution of hop_pmf. Mass that falls past
/// the support cap, was trimmed, or was already missing from hop_pmf ends up in
/// residual_tail. Throws PrecisionError when hop_pmf.residual_tail >= 1e-9 or the
/// total unplaced mass exceeds max_lost_mass.
DelayPmf transport_pmf_oracle(const HopCountPmf& pmf, const DelayPmf& hop_pmf,
                              const OracleOptions& options = {});

/// Two-sided enclosure of an exact probability.
struct ProbabilityBracket {
    double lo = 0.0;
    double hi = 0.0;
    [[nodiscard]] double mid() const noexcept { return 0.5 * (lo + hi); }
};

/// Pr{D > L x} = sum_l f_L(l) Pr{T_1 + ... + T_l >= floor(l x) + 1} for every x.
///
/// The l-loop stops once a Chernoff bound built from hop_pmf shows the remaining
/// classes contribute less than rel_tol times the running estimate; that bound, the
/// trimmed mass and the mass missing from hop_pmf all widen the bracket.
std::vector<ProbabilityBracket> transport_exceedance_oracle(const HopCountPmf& pmf, const DelayPmf& hop_pmf,
                                                            std::span<const double> xs, double rel_tol = 1e-10);

ProbabilityBracket transport_exceedance_oracle(const HopCountPmf& pmf, const DelayPmf& hop_pmf, double x,
                                               double rel_tol = 1e-10);

}  // namespace mrnet
