#pragma once

// Large-deviation tail analysis of Pr{D > L x}, x being a per-hop delay budget.

#include "mrnet/aloha_hop.hpp"
#include "mrnet/renewal_transport.hpp"
#include "mrnet/sd_distance.hpp"

#include <optional>
#include <span>
#include <vector>

namespace mrnet {

struct RateFunctionEval {
    double x = 0.0;
    double i_plus = 0.0;   ///< sup_w { x w - ln M_T(e^w) }
    double i_minus = 0.0;  ///< (x-1) ln(1/c), see rate_minus
    double i_minus_exact = 0.0;  ///< -ln Pr{T > x}, see rate_minus_exact
    double phi_x = 0.0;    ///< c * y2, in (0, 1)
    double omega_star = 0.0;  ///< ln(phi_x / c), the maximizer
    // internals of the stationary-point equation
    double a = 0.0;
    double c = 0.0;
    double A = 0.0;
    double A_lower = 0.0;
    double A_upper = 0.0;
    double y1 = 0.0;  ///< discarded root, > 1/a (infinite when a = 0)
    double y2 = 0.0;  ///< selected root, in (0, 1/c)
};

/// Closed-form rate function of the per-hop delay. Throws DomainError for x <= 1 or
/// x below E[T]; x = E[T] gives 0. For the deterministic law T = 1 every rate is
/// +infinity. Throws NumericError if a root falls outside its bracket.
RateFunctionEval rate_plus(const AlohaHopModel& hop, double x);

/// Golden-section maximization of x w - ln M_T(e^w) over (0, ln(1/c)) to an
/// interval width of 1e-12. Independent of the closed form; meant as a test oracle.
double rate_plus_numeric(const AlohaHopModel& hop, double x);

/// (x-1) ln(1/c). Throws DomainError for x < 1.
///
/// This is the exponent of c^(l(x-1)), which is not a valid lower bound on
/// Pr{S_l > l x}: with L = 1 the exact tail is beta2 c^floor(x) < c^(x-1).
/// tail_bounds therefore uses rate_minus_exact.
double rate_minus(const AlohaHopModel& hop, double x);

/// -ln Pr{T > x} = -ln beta2 - floor(x) ln c, for x >= 1.
double rate_minus_exact(const AlohaHopModel& hop, double x);

struct TailCurve {
    std::vector<double> grid;
    std::vector<double> lower;   ///< M_L(Pr{T > x})
    std::vector<double> upper;   ///< M_L(e^-I+(x))
    std::vector<double> approx;  ///< exp(-I+(x) E[L])
    std::optional<std::vector<double>> mc_estimate;
    std::optional<std::vector<double>> mc_ci_halfwidth;
};

/// Bounds and approximation of Pr{D > L x} on a grid of x > 1. Points with
/// x <= E[T] get the trivial upper bound and approximation 1. Throws NumericError
/// if lower > upper or approx > upper anywhere.
TailCurve tail_bounds(const HopCountPmf& pmf, const AlohaHopModel& hop, std::span<const double> grid);

struct PrecisionDelta {
    double delta = 0.0;  ///< -ln Pr{D > L x} / (I+(x) E[L]) - 1
    ProbabilityBracket exact;
    double i_plus = 0.0;
    double mean_L = 0.0;
};

/// Compares the exact tail from the convolution oracle with exp(-I+(x) E[L]).
/// hop_pmf defaults to perhop_pmf(hop).
PrecisionDelta precision_delta(const HopCountPmf& pmf, const AlohaHopModel& hop, double x,
                               const std::optional<DelayPmf>& hop_pmf = std::nullopt);

}  // namespace mrnet
