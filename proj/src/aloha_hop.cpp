#include "mrnet/aloha_hop.hpp"

#include "mrnet/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numbers>

namespace mrnet {

namespace {

constexpr int kMaxIterations = 1'000'000;
constexpr double kRootTolerance = 1e-15;

// Safeguarded Newton on an increasing function f over [lo, hi] with f(lo) <= 0 <= f(hi).
template <class F, class DF>
double increasing_root(F f, DF df, double lo, double hi) {
    double x = hi;
    for (int it = 0; it < kMaxIterations; ++it) {
        const double fx = f(x);
        if (fx == 0.0) return x;
        if (fx < 0.0) lo = x; else hi = x;
        if (hi - lo < kRootTolerance) return 0.5 * (lo + hi);
        const double d = df(x);
        double next = (d > 0.0) ? x - fx / d : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) < kRootTolerance * std::max(1.0, std::abs(x))) return next;
        x = next;
    }
    throw NumericError("success-probability iteration did not converge");
}

// Moments of a discrete law from its generating function at z = 1.
struct TwoMoments {
    double mean;
    double variance;
};

TwoMoments moments_at_one(const RationalFunction& m) {
    const RationalFunction d1 = m.derivative();
    const RationalFunction d2 = d1.derivative();
    const double mean = d1(1.0);
    const double factorial2 = d2(1.0);
    return {mean, factorial2 + mean - mean * mean};
}

}  // namespace

double ContentionGeometry::interference_count() const noexcept {
    return std::numbers::pi * radius * radius * density();
}

void ContentionGeometry::validate() const {
    if (!(n > 0.0) || !(area > 0.0)) throw std::invalid_argument("node count and area must be positive");
    if (!(radius > 0.0)) throw std::invalid_argument("interference radius must be positive");
    if (interference_count() < 1.0) {
        throw std::invalid_argument(
            fmt::format("interference range holds {:.6g} nodes; at least 1 is required", interference_count()));
    }
}

SuccessProbability solve_success_probability(double theta, double n_int, SuccessEquation eq) {
    if (!(theta >= 0.0) || !(n_int >= 0.0) || !std::isfinite(theta * n_int)) {
        throw DomainError("theta and n_int must be finite and non-negative");
    }
    const double g = theta * n_int;
    if (g == 0.0) return {1.0, 0.0};

    double p = 1.0;
    if (eq == SuccessEquation::kLoadTimesP) {
        // p - exp(-g p) is strictly increasing with a single root in (0, 1).
        p = increasing_root([g](double x) { return x - std::exp(-g * x); },
                            [g](double x) { return 1.0 + g * std::exp(-g * x); }, 0.0, 1.0);
        return {p, std::abs(p - std::exp(-g * p))};
    }

    // p = exp(-g/p)  <=>  p ln p = -g; p ln p is increasing on [1/e, 1] from -1/e to 0.
    const double inv_e = std::exp(-1.0);
    if (g > inv_e) {
        throw DomainError(fmt::format("p = exp(-G/p) has no root for G = {:.6g} > 1/e", g));
    }
    p = increasing_root([g](double x) { return x * std::log(x) + g; },
                        [](double x) { return std::log(x) + 1.0; }, inv_e, 1.0);
    return {p, std::abs(p - std::exp(-g / p))};
}

AlohaHopModel::AlohaHopModel(double p, double q, double theta) : p_(p), q_(q), theta_(theta) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument(fmt::format("p = {} outside (0, 1]", p));
    if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument(fmt::format("q = {} outside (0, 1]", q));
    if (!(theta >= 0.0 && theta < 1.0)) throw std::invalid_argument(fmt::format("theta = {} outside [0, 1)", theta));

    a_ = 1.0 - q;
    mean_x_ = 1.0 + (1.0 - p) / (p * q);
    p0_ = 1.0 - theta * mean_x_;
    if (!(p0_ > 0.0)) {
        throw UnstableQueueError(
            fmt::format("theta * E[X] = {:.6g} >= 1; offered load exceeds service capacity", theta * mean_x_));
    }
    b_ = (1.0 - p * q) - p * a_ * theta;
    c_ = b_ / (1.0 - theta);

    mgf_x_ = {Polynomial{{0.0, p, -p * a_}}, Polynomial{{1.0, -(1.0 - p * q)}}};
    mgf_t_ = {Polynomial{{0.0, p0_ * p, -p0_ * p * a_}}, Polynomial{{1.0 - theta, -b_}}};

    const TwoMoments mx = moments_at_one(mgf_x_);
    var_x_ = mx.variance;

    if (p == 1.0) {
        // X = 1 and the numerator factor (1 - a z) cancels the pole: T = 1.
        deterministic_ = true;
        beta1_ = 1.0;
        beta2_ = 0.0;
        mean_t_ = 1.0;
        var_t_ = 0.0;
        return;
    }

    const double k = p0_ * p / (1.0 - theta);
    beta1_ = k * a_ / c_;
    beta2_ = k * (c_ - a_) / (c_ * (1.0 - c_));

    const TwoMoments mt = moments_at_one(mgf_t_);
    mean_t_ = mt.mean;
    var_t_ = mt.variance;
}

double AlohaHopModel::delay_survival(long k) const noexcept {
    if (k < 1) return 1.0;
    if (deterministic_) return 0.0;
    return beta2_ * std::pow(c_, static_cast<double>(k));
}

AlohaHopModel hop_model_from_contention(double theta, double q, double n_int, SuccessEquation eq) {
    return {solve_success_probability(theta, n_int, eq).p, q, theta};
}

MgfStats service_stats(const AlohaHopModel& model) {
    const double pole = 1.0 / (1.0 - model.p() * model.q());  // +inf when pq = 1
    RationalFunction m = model.service_mgf();
    return {[m, pole](double z) {
                if (!(z >= 0.0) || z >= pole) {
                    throw DomainError(fmt::format("M_X(z) needs 0 <= z < {:.12g}; got {}", pole, z));
                }
                return m(z);
            },
            model.mean_X(), model.var_X()};
}

MgfStats perhop_stats(const AlohaHopModel& model) {
    if (model.deterministic()) {
        return {[](double z) {
                    if (!(z >= 0.0)) throw DomainError("M_T(z) needs z >= 0");
                    return z;
                },
                1.0, 0.0};
    }
    const double limit = 1.0 / model.c();
    RationalFunction m = model.delay_mgf();
    return {[m, limit](double z) {
                if (!(z >= 0.0) || z >= limit) {
                    throw DomainError(fmt::format("M_T(z) needs 0 <= z < 1/c = {:.12g}; got {}", limit, z));
                }
                return m(z);
            },
            model.mean_T(), model.var_T()};
}

double geo_g1_sojourn_mgf(double theta, double mean_x, const std::function<double(double)>& mgf_x, double z) {
    if (z == 1.0) return 1.0;
    const double mx = mgf_x(z);
    return (1.0 - theta * mean_x) * (z - 1.0) * mx / ((z - 1.0) + theta * (1.0 - mx));
}

long default_delay_support(const AlohaHopModel& model) {
    if (model.deterministic() || model.beta2() < 1e-10) return 1;
    const double c = model.c();
    long k = std::max(1L, static_cast<long>(std::floor(std::log(1e-10 / model.beta2()) / std::log(c))));
    while (k > 1 && model.beta2() * std::pow(c, static_cast<double>(k - 1)) < 1e-10) --k;
    while (model.beta2() * std::pow(c, static_cast<double>(k)) >= 1e-10) ++k;
    return k;
}

DelayPmf perhop_pmf(const AlohaHopModel& model, long k_max) {
    if (k_max <= 0) k_max = default_delay_support(model);
    DelayPmf out;
    out.offset = 1;
    out.masses.resize(static_cast<std::size_t>(k_max));
    if (model.deterministic()) {
        out.masses[0] = 1.0;
        return out;
    }
    const double c = model.c();
    const double head = model.beta2() * (1.0 - c);
    double ck = 1.0;  // c^(k-1)
    for (long k = 1; k <= k_max; ++k) {
        out.masses[static_cast<std::size_t>(k - 1)] = head * ck;
        ck *= c;
    }
    out.masses[0] += model.beta1();
    out.residual_tail = model.beta2() * ck;
    return out;
}

double access_capacity(double interference_count) {
    if (!(interference_count > 0.0)) throw std::invalid_argument("interference count must be positive");
    return std::exp(-1.0) / interference_count;
}

double access_capacity(const ContentionGeometry& geom) {
    geom.validate();
    return access_capacity(geom.interference_count());
}

bool check_flow(double lambda, const HopCountPmf& pmf, const ContentionGeometry& geom) {
    return lambda * distance_stats(pmf).mean <= access_capacity(geom);
}

}  // namespace mrnet
