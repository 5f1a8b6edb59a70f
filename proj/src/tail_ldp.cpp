#include "mrnet/tail_ldp.hpp"

#include "mrnet/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace mrnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_budget(double x) {
    if (!(x > 1.0) || !std::isfinite(x)) {
        throw DomainError(fmt::format("per-hop budget x = {} must exceed one slot", x));
    }
}

void check_above_mean(const AlohaHopModel& hop, double x) {
    check_budget(x);
    if (x < hop.mean_T() * (1.0 - 1e-12)) {
        throw DomainError(fmt::format("rate function needs x >= E[T] = {:.12g}; got {}", hop.mean_T(), x));
    }
}

}  // namespace

RateFunctionEval rate_plus(const AlohaHopModel& hop, double x) {
    check_above_mean(hop, x);
    RateFunctionEval r;
    r.x = x;
    r.a = hop.a();
    r.c = hop.c();
    if (hop.deterministic()) {
        r.i_plus = r.i_minus = r.i_minus_exact = kInf;
        r.phi_x = std::numeric_limits<double>::quiet_NaN();
        r.omega_star = kInf;
        return r;
    }
    const double a = r.a;
    const double c = r.c;
    const double u = 1.0 / (x - 1.0);
    const double ratio = (c + a) / (c - a);
    r.A = u * u + 2.0 * ratio * u + 1.0;
    r.A_lower = (u + 1.0) * (u + 1.0);
    r.A_upper = (u + ratio) * (u + ratio);

    // y2 = ((c+a) + (c-a)u - (c-a) sqrt(A)) / (2ac), rationalized so that a = 0 and
    // small a do not cancel: y2 = 2 (x-1) / (B + sqrt(B^2 - 4 (x-1)^2 a c)).
    const double xm1 = x - 1.0;
    const double big_b = xm1 * (c + a) + (c - a);
    const double disc = big_b * big_b - 4.0 * xm1 * xm1 * a * c;
    r.y2 = 2.0 * xm1 / (big_b + std::sqrt(std::max(0.0, disc)));
    r.y1 = a > 0.0 ? 1.0 / (a * c * r.y2) : kInf;
    r.phi_x = c * r.y2;
    r.omega_star = std::log(r.y2);

    const double slack = 1e-12 * r.A;
    if (!(r.A_lower <= r.A + slack && r.A < r.A_upper + slack)) {
        throw NumericError(fmt::format("A = {:.17g} outside [{:.17g}, {:.17g}]", r.A, r.A_lower, r.A_upper));
    }
    if (!(r.y2 > 0.0 && r.y2 * c < 1.0) || (a > 0.0 && !(r.y1 * a > 1.0))) {
        throw NumericError(fmt::format("stationary roots y1 = {:.17g}, y2 = {:.17g} outside their brackets", r.y1, r.y2));
    }

    const double phi = r.phi_x;
    const double q = hop.q();
    const double value = -xm1 * std::log(c) + xm1 * std::log(phi) + std::log1p(-phi) -
                         std::log(1.0 / q - (1.0 - q) / q * phi / c) - std::log1p(-c);
    r.i_plus = std::max(0.0, value);
    r.i_minus = rate_minus(hop, x);
    r.i_minus_exact = rate_minus_exact(hop, x);
    return r;
}

double rate_plus_numeric(const AlohaHopModel& hop, double x) {
    check_above_mean(hop, x);
    if (hop.deterministic()) return kInf;
    const RationalFunction& mt = hop.delay_mgf();
    auto omega_fn = [&](double w) { return x * w - std::log(mt(std::exp(w))); };

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = 0.0;
    double hi = -std::log(hop.c());
    double m1 = hi - inv_phi * (hi - lo);
    double m2 = lo + inv_phi * (hi - lo);
    double f1 = omega_fn(m1);
    double f2 = omega_fn(m2);
    while (hi - lo > 1e-12) {
        if (f1 < f2) {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + inv_phi * (hi - lo);
            f2 = omega_fn(m2);
        } else {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - inv_phi * (hi - lo);
            f1 = omega_fn(m1);
        }
    }
    return std::max({0.0, f1, f2});
}

double rate_minus(const AlohaHopModel& hop, double x) {
    if (!(x >= 1.0) || !std::isfinite(x)) throw DomainError(fmt::format("I-(x) needs x >= 1; got {}", x));
    if (hop.deterministic()) return x == 1.0 ? 0.0 : kInf;
    return (x - 1.0) * -std::log(hop.c());
}

double rate_minus_exact(const AlohaHopModel& hop, double x) {
    if (!(x >= 1.0) || !std::isfinite(x)) throw DomainError(fmt::format("I-(x) needs x >= 1; got {}", x));
    if (hop.deterministic()) return kInf;
    return -std::log(hop.beta2()) - std::floor(x) * std::log(hop.c());
}

TailCurve tail_bounds(const HopCountPmf& pmf, const AlohaHopModel& hop, std::span<const double> grid) {
    const double mean_L = distance_stats(pmf).mean;
    TailCurve out;
    out.grid.assign(grid.begin(), grid.end());
    for (double x : grid) {
        check_budget(x);
        const double lower = mgf_L(pmf, std::exp(-rate_minus_exact(hop, x)));
        double upper = 1.0;
        double approx = 1.0;
        if (x > hop.mean_T()) {
            const double ip = rate_plus(hop, x).i_plus;
            upper = mgf_L(pmf, std::exp(-ip));
            approx = std::exp(-ip * mean_L);
        }
        if (lower > upper * (1.0 + 1e-12) || approx > upper * (1.0 + 1e-12)) {
            throw NumericError(fmt::format("tail ordering violated at x = {}: lower {:.6g}, approx {:.6g}, upper {:.6g}",
                                           x, lower, approx, upper));
        }
        out.lower.push_back(lower);
        out.upper.push_back(upper);
        out.approx.push_back(approx);
    }
    return out;
}

PrecisionDelta precision_delta(const HopCountPmf& pmf, const AlohaHopModel& hop, double x,
                               const std::optional<DelayPmf>& hop_pmf) {
    PrecisionDelta out;
    out.i_plus = rate_plus(hop, x).i_plus;
    out.mean_L = distance_stats(pmf).mean;
    out.exact = transport_exceedance_oracle(pmf, hop_pmf ? *hop_pmf : perhop_pmf(hop), x);
    out.delta = -std::log(out.exact.mid()) / (out.i_plus * out.mean_L) - 1.0;
    return out;
}

}  // namespace mrnet
