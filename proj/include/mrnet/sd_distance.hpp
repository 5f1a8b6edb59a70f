#pragma once

// Source-destination (SD) distance distributions: the hop-count pmf that acts as
// the global traffic descriptor, its moments and residual-hop statistics, the
// throughput scalability classifier, and the continuous traffic scaling laws.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mrnet {

/// Discrete distribution of the SD hop count L on {1, ..., phi}.
class HopCountPmf {
public:
    /// Takes probs[l-1] = f_L(l). Throws std::invalid_argument unless every entry is
    /// non-negative and the entries sum to one within 1e-12.
    explicit HopCountPmf(std::vector<double> probs);

    /// Normalizes non-negative weights; throws DegenerateAllocationError on zero total.
    static HopCountPmf from_weights(std::vector<double> weights);
    static HopCountPmf point_mass(int l);
    static HopCountPmf uniform(int phi);
    /// f_L(l) = (1-g)^(l-1) g, cut where the residual mass drops below `residual` and renormalized.
    static HopCountPmf geometric(double g, double residual = 1e-12);

    [[nodiscard]] int phi() const noexcept { return static_cast<int>(probs_.size()); }
    [[nodiscard]] std::span<const double> probs() const noexcept { return probs_; }
    /// f_L(l); zero outside {1..phi}.
    [[nodiscard]] double operator()(int l) const noexcept;

    friend bool operator==(const HopCountPmf&, const HopCountPmf&) = default;

private:
    std::vector<double> probs_;
};

/// Per-class input rates lambda(l), packets/slot, for l = 1..phi.
struct RateAllocation {
    std::vector<double> rates;
    double lambda_total = 0.0;  ///< network throughput, sum of rates
    double theta = 0.0;         ///< implied node throughput, sum of l * rates[l-1]

    /// Computes the two aggregates; throws std::invalid_argument on a negative rate.
    static RateAllocation from_rates(std::vector<double> rates);
};

/// f_L(l) = lambda(l) / lambda.
HopCountPmf pmf_from_rates(const RateAllocation& alloc);

struct DistanceStats {
    double mean = 0.0;           ///< E[L]
    double second_moment = 0.0;  ///< E[L^2]
    double variance = 0.0;
    double residual_mean = 0.0;  ///< E[L^] = (E[L^2] + E[L]) / (2 E[L])
    double workload_bias = 0.0;  ///< u = E[L^] / E[L], always > 1/2
};

DistanceStats distance_stats(const HopCountPmf& pmf);

/// E[z^L] for z in [0, 1].
double mgf_L(const HopCountPmf& pmf, double z);

/// Generating function of the residual hop count, z(1 - M_L(z)) / ((1 - z) E[L]),
/// evaluated through the polynomial form so z = 1 needs no special casing.
double residual_mgf_L(const HopCountPmf& pmf, double z);

/// Sum of f_L(l) y^l for any y >= 0. The finite support makes this a polynomial, so
/// it is defined beyond the unit interval (needed when y is a per-hop MGF value).
double hop_polynomial(const HopCountPmf& pmf, double y);

// ---------------------------------------------------------------------------
// Scalability classification

struct ScalabilityEvidence {
    long phi = 0;
    std::vector<double> partial_sums;  ///< partial_sums[M-1] = sum_{l<=M} l * lambda_phi(l)
};

struct ScalabilityVerdict {
    bool scalable = false;
    std::optional<int> witness_M;
    std::vector<ScalabilityEvidence> evidence;
};

using RateFamily = std::function<RateAllocation(long phi)>;

/// Numeric classifier for whether lambda stays bounded away from zero as phi grows.
///
/// For each phi in the schedule it tabulates S(M, phi) = sum_{l<=M} l lambda_phi(l),
/// M = 1..m_max. The family is judged scalable when some M has S(M, phi_last) > tol
/// and |S(M, phi_last) - S(M, phi_prev)| < tol / 10. The verdict keeps the table.
ScalabilityVerdict classify_scalability(const RateFamily& family, int m_max,
                                        std::span<const long> phi_schedule, double tol);

namespace families {
/// lambda(l) = lambda0 / phi.
RateFamily uniform(double lambda0);
/// lambda(l) = lambda0 * alpha(l) on a fixed support that does not grow with phi.
RateFamily fixed_support(double lambda0, std::vector<double> alpha);
/// lambda(l) = lambda0 (1-g)^(l-1) g / l.
RateFamily geometric_over_l(double lambda0, double g);
/// Uniform destination choice over the network: lambda(l) = l lambda0 / (phi(phi+1)/2).
RateFamily equal_probability_destination(double lambda0);
}  // namespace families

// ---------------------------------------------------------------------------
// Traffic scaling laws (L treated as continuous, except the geometric law)

struct PowerLaw {
    double alpha = -4.0;
    double epsilon = 1.0;  ///< minimum SD distance
};
struct ExponentialLaw {
    double alpha = 0.0;
    double beta = 1.0;
};
struct NormalLaw {
    double alpha = 0.0;
    double beta = 1.0;
};
struct RayleighLaw {
    double sigma = 1.0;
};
struct GeometricLaw {
    double g = 0.2;
};

using ScalingLaw = std::variant<PowerLaw, ExponentialLaw, NormalLaw, RayleighLaw, GeometricLaw>;

/// Throws std::invalid_argument if the law is not normalizable.
void validate(const ScalingLaw& law);

/// Moments of a scaling law. An empty optional marks a divergent moment.
struct ScalingLawStats {
    double c0 = 0.0;
    std::optional<double> mean;
    std::optional<double> second_moment;
    /// Continuous laws use u = E[L^2] / (2 E[L]^2); the geometric law keeps the
    /// discrete definition (E[L^2] + E[L]) / (2 E[L]^2).
    std::optional<double> workload_bias;
    std::function<double(double)> mgf;  ///< z -> E[z^L], z in [0, 1]
};

ScalingLawStats scaling_law_stats(const ScalingLaw& law);

double scaling_law_cdf(const ScalingLaw& law, double x);

/// Power-law exponent that puts `coverage` of the traffic inside radius r_t.
double alpha_for_region(double r_t, double epsilon, double coverage);

/// lambda * epsilon / theta = 1 + 1/(1+alpha) for a power law; empty when E[L] diverges.
std::optional<double> power_law_relative_throughput(double alpha);

/// Bins the law onto {1..phi}: probs[l-1] is proportional to the mass of
/// [max(lo, l-0.5), l+0.5); mass beyond phi + 0.5 is folded into l = phi and the
/// result renormalized. The geometric law is used natively.
HopCountPmf scaling_law_discretize(const ScalingLaw& law, int phi);

// ---------------------------------------------------------------------------
// Distribution mini-language: geometric:0.2, uniform:50, power:-4:1.0,
// rayleigh:1.0, explicit:[p1,p2,...]

struct DistSpec {
    std::variant<HopCountPmf, ScalingLaw> value;
    std::string text;
};

/// Throws ConfigError on malformed input.
DistSpec parse_dist_spec(std::string_view text);

/// Continuous laws are discretized on {1..phi_continuous}; geometric laws are
/// truncated at residual mass 1e-12.
HopCountPmf to_pmf(const DistSpec& spec, int phi_continuous = 100);

/// "explicit:[w1,w2,...]" with 12 significant digits per entry.
std::string format_explicit(std::span<const double> weights);

}  // namespace mrnet
