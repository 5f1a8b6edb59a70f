#include "mrnet/rate_alloc.hpp"

#include "mrnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace mrnet {

namespace {

void check_theta_phi(double theta, int phi) {
    if (!(theta > 0.0) || !std::isfinite(theta)) throw std::invalid_argument("theta must be positive");
    if (phi < 1) throw std::invalid_argument("phi must be at least 1");
}

double harmonic(int phi) {
    double h = 0.0;
    for (int l = phi; l >= 1; --l) h += 1.0 / l;
    return h;
}

FairnessResult make_result(std::vector<double> rates, FairnessCriterion criterion) {
    FairnessResult r;
    r.allocation = RateAllocation::from_rates(std::move(rates));
    r.network_throughput = r.allocation.lambda_total;
    r.workload_bias = workload_bias_from_rates(r.allocation.rates);
    r.criterion = criterion;
    return r;
}

// Shares x_l = l lambda(l) / theta live on the unit simplex; the bias constraint
// becomes h(x) = (A + 1) B - 2u with A = sum l x_l and B = sum x_l / l.
struct ShareProblem {
    const AllocationObjective* objective;
    double theta;
    double u;
    int phi;

    std::vector<double> rates(const std::vector<double>& x) const {
        std::vector<double> r(x.size());
        for (int l = 1; l <= phi; ++l) r[l - 1] = theta * std::max(x[l - 1], 0.0) / l;
        return r;
    }
    double f(const std::vector<double>& x) const {
        const auto r = rates(x);
        const double v = (*objective)(r);
        return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    }
    double h(const std::vector<double>& x) const {
        double a = 0.0, b = 0.0;
        for (int l = 1; l <= phi; ++l) {
            a += l * x[l - 1];
            b += x[l - 1] / l;
        }
        return (a + 1.0) * b - 2.0 * u;
    }
    std::vector<double> grad_h(const std::vector<double>& x) const {
        double a = 0.0, b = 0.0;
        for (int l = 1; l <= phi; ++l) {
            a += l * x[l - 1];
            b += x[l - 1] / l;
        }
        std::vector<double> g(x.size());
        for (int l = 1; l <= phi; ++l) g[l - 1] = l * b + (a + 1.0) / l;
        return g;
    }
};

// Moves mass between pairs of shares to raise f - nu h - mu/2 h^2.
void pairwise_ascent(const ShareProblem& prob, std::vector<double>& x, double nu, double mu) {
    auto merit = [&](const std::vector<double>& y) {
        const double hv = prob.h(y);
        return prob.f(y) - nu * hv - 0.5 * mu * hv * hv;
    };
    const int n = prob.phi;
    double current = merit(x);
    std::vector<double> y = x;
    for (int sweep = 0; sweep < 40; ++sweep) {
        const double start = current;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                // delta moves mass from i to j, delta in [0, x_i].
                const double hi = x[i];
                if (hi <= 0.0) continue;
                auto eval = [&](double d) {
                    y = x;
                    y[i] -= d;
                    y[j] += d;
                    return merit(y);
                };
                constexpr int kScan = 8;
                double best_d = 0.0, best_v = current;
                for (int k = 1; k <= kScan; ++k) {
                    const double d = hi * k / kScan;
                    const double v = eval(d);
                    if (v > best_v) best_v = v, best_d = d;
                }
                double lo_d = std::max(0.0, best_d - hi / kScan);
                double hi_d = std::min(hi, best_d + hi / kScan);
                constexpr double kInvPhi = 0.6180339887498949;
                double c = hi_d - kInvPhi * (hi_d - lo_d);
                double d = lo_d + kInvPhi * (hi_d - lo_d);
                double fc = eval(c), fd = eval(d);
                for (int it = 0; it < 60 && hi_d - lo_d > 1e-15; ++it) {
                    if (fc >= fd) {
                        hi_d = d;
                        d = c;
                        fd = fc;
                        c = hi_d - kInvPhi * (hi_d - lo_d);
                        fc = eval(c);
                    } else {
                        lo_d = c;
                        c = d;
                        fc = fd;
                        d = lo_d + kInvPhi * (hi_d - lo_d);
                        fd = eval(d);
                    }
                }
                if (fc > best_v) best_v = fc, best_d = c;
                if (fd > best_v) best_v = fd, best_d = d;
                if (best_d > 0.0 && best_v > current) {
                    x[i] -= best_d;
                    x[j] += best_d;
                    if (x[i] < 0.0) x[i] = 0.0;
                    current = best_v;
                }
            }
        }
        if (current - start <= 1e-14 * std::max(1.0, std::abs(current))) break;
    }
}

// Newton steps along the simplex-projected gradient of h; returns the final |h|.
double restore(const ShareProblem& prob, std::vector<double>& x) {
    double hv = prob.h(x);
    for (int it = 0; it < 200 && std::abs(hv) > 1e-15; ++it) {
        auto g = prob.grad_h(x);
        // Only coordinates that can move in the required direction participate.
        std::vector<bool> active(x.size(), true);
        std::vector<double> d(x.size(), 0.0);
        for (int pass = 0; pass < 3; ++pass) {
            double mean = 0.0;
            int count = 0;
            for (std::size_t l = 0; l < x.size(); ++l)
                if (active[l]) mean += g[l], ++count;
            if (count < 2) return std::abs(hv);
            mean /= count;
            bool changed = false;
            for (std::size_t l = 0; l < x.size(); ++l) {
                d[l] = active[l] ? g[l] - mean : 0.0;
                // Direction sign is -sign(h) * d; block coordinates pinned at zero.
                if (active[l] && x[l] <= 0.0 && -hv * d[l] < 0.0) active[l] = false, changed = true;
            }
            if (!changed) break;
        }
        double slope = 0.0;
        for (std::size_t l = 0; l < x.size(); ++l) slope += g[l] * d[l];
        if (slope <= 0.0) return std::abs(hv);
        double t = -hv / slope;
        for (std::size_t l = 0; l < x.size(); ++l)
            if (t * d[l] < 0.0 && x[l] + t * d[l] < 0.0) t = -x[l] / d[l];
        for (std::size_t l = 0; l < x.size(); ++l) x[l] = std::max(0.0, x[l] + t * d[l]);
        const double sum = std::accumulate(x.begin(), x.end(), 0.0);
        for (auto& v : x) v /= sum;
        const double next = prob.h(x);
        if (std::abs(next) >= std::abs(hv) && it > 20) return std::abs(next);
        hv = next;
    }
    return std::abs(hv);
}

}  // namespace

double workload_bias_from_rates(std::span<const double> rates) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        const double l = static_cast<double>(i + 1);
        s0 += rates[i];
        s1 += l * rates[i];
        s2 += l * l * rates[i];
    }
    if (!(s0 > 0.0)) throw DegenerateAllocationError("allocation has zero total rate");
    return (s2 * s0 + s1 * s0) / (2.0 * s1 * s1);
}

double proportional_workload_bias(int phi) {
    if (phi < 1) throw std::invalid_argument("phi must be at least 1");
    return harmonic(phi) * (phi + 3.0) / (4.0 * phi);
}

double maxmin_workload_bias(int phi) {
    if (phi < 1) throw std::invalid_argument("phi must be at least 1");
    return (2.0 * phi + 4.0) / (3.0 * phi + 3.0);
}

FairnessResult proportional_allocation(double theta, int phi) {
    check_theta_phi(theta, phi);
    std::vector<double> rates(phi);
    for (int l = 1; l <= phi; ++l) rates[l - 1] = theta / (static_cast<double>(l) * phi);
    auto r = make_result(std::move(rates), FairnessCriterion::kProportional);
    r.network_throughput = theta * harmonic(phi) / phi;
    r.approx_throughput = theta * std::log(static_cast<double>(phi)) / phi;
    r.approx_workload_bias = std::log(static_cast<double>(phi)) / 4.0;
    return r;
}

FairnessResult maxmin_allocation(double theta, int phi) {
    check_theta_phi(theta, phi);
    const double each = 2.0 * theta / (static_cast<double>(phi) * (phi + 1.0));
    auto r = make_result(std::vector<double>(phi, each), FairnessCriterion::kMaxMin);
    r.network_throughput = 2.0 * theta / (phi + 1.0);
    r.workload_bias = maxmin_workload_bias(phi);
    r.approx_workload_bias = 2.0 / 3.0;
    return r;
}

namespace objectives {

AllocationObjective log_sum() {
    return [](std::span<const double> rates) {
        double s = 0.0;
        for (double r : rates) {
            if (!(r > 0.0)) return -std::numeric_limits<double>::infinity();
            s += std::log(r);
        }
        return s;
    };
}

AllocationObjective total_rate() {
    return [](std::span<const double> rates) { return std::accumulate(rates.begin(), rates.end(), 0.0); };
}

}  // namespace objectives

QosResult optimize_with_qos(const AllocationObjective& objective, double theta, double u_target, int phi,
                            const QosOptions& options) {
    check_theta_phi(theta, phi);
    if (phi > 20) throw std::invalid_argument("optimize_with_qos supports phi <= 20");
    if (!(u_target > 0.5)) throw std::invalid_argument("u_target must exceed 1/2");
    if (!objective) throw std::invalid_argument("objective is empty");

    const ShareProblem prob{&objective, theta, u_target, phi};

    std::vector<std::vector<double>> starts;
    starts.emplace_back(phi, 1.0 / phi);
    std::mt19937_64 rng(options.seed);
    std::exponential_distribution<double> expo(1.0);
    for (int s = 1; s < options.starts; ++s) {
        std::vector<double> x(phi);
        for (auto& v : x) v = expo(rng);
        const double sum = std::accumulate(x.begin(), x.end(), 0.0);
        for (auto& v : x) v /= sum;
        starts.push_back(std::move(x));
    }

    bool have_feasible = false;
    double best_obj = -std::numeric_limits<double>::infinity();
    double best_res = std::numeric_limits<double>::infinity();
    std::vector<double> best_x;

    for (auto x : starts) {
        if (phi > 1) {
            double nu = 0.0, mu = 10.0;
            double prev_h = std::abs(prob.h(x));
            for (int outer = 0; outer < 25; ++outer) {
                pairwise_ascent(prob, x, nu, mu);
                const double hv = prob.h(x);
                nu += mu * hv;
                if (std::abs(hv) > 0.25 * prev_h) mu = std::min(mu * 4.0, 1e10);
                prev_h = std::abs(hv);
                if (prev_h < 1e-12) break;
            }
            restore(prob, x);
        }
        const double res = std::abs(prob.h(x)) / (2.0 * u_target);
        const bool ok = res <= options.feasibility_tol;
        const double obj = prob.f(x);
        if (ok) {
            if (!have_feasible || obj > best_obj) {
                have_feasible = true;
                best_obj = obj;
                best_res = res;
                best_x = x;
            }
        } else if (!have_feasible && res < best_res) {
            best_obj = obj;
            best_res = res;
            best_x = x;
        }
    }

    QosResult out;
    out.feasible = have_feasible;
    out.objective = best_obj;
    out.bias_residual = best_res;
    out.result = make_result(prob.rates(best_x), FairnessCriterion::kCustom);
    out.resource_residual = std::abs(out.result.allocation.theta - theta) / theta;
    return out;
}

}  // namespace mrnet
