#include "mrnet/sd_distance.hpp"

#include "mrnet/errors.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

namespace mrnet {

namespace {

constexpr double kSumTolerance = 1e-12;

double kahan_sum(std::span<const double> xs) {
    double sum = 0.0;
    double comp = 0.0;
    for (double x : xs) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

}  // namespace

// ---------------------------------------------------------------------------
// HopCountPmf

HopCountPmf::HopCountPmf(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) {
        throw std::invalid_argument("hop-count pmf needs at least one class");
    }
    for (double p : probs_) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw std::invalid_argument("hop-count pmf entries must be finite and non-negative");
        }
    }
    const double total = kahan_sum(probs_);
    if (std::abs(total - 1.0) > kSumTolerance) {
        throw std::invalid_argument(fmt::format("hop-count pmf sums to {:.15g}, not 1", total));
    }
}

HopCountPmf HopCountPmf::from_weights(std::vector<double> weights) {
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument("weights must be finite and non-negative");
        }
    }
    const double total = kahan_sum(weights);
    if (!(total > 0.0)) {
        throw DegenerateAllocationError("total weight is zero");
    }
    for (double& w : weights) w /= total;
    return HopCountPmf(std::move(weights));
}

HopCountPmf HopCountPmf::point_mass(int l) {
    if (l < 1) throw std::invalid_argument("point mass needs l >= 1");
    std::vector<double> probs(static_cast<std::size_t>(l), 0.0);
    probs.back() = 1.0;
    return HopCountPmf(std::move(probs));
}

HopCountPmf HopCountPmf::uniform(int phi) {
    if (phi < 1) throw std::invalid_argument("uniform pmf needs phi >= 1");
    return HopCountPmf(std::vector<double>(static_cast<std::size_t>(phi), 1.0 / phi));
}

HopCountPmf HopCountPmf::geometric(double g, double residual) {
    if (!(g > 0.0 && g <= 1.0)) throw std::invalid_argument("geometric pmf needs 0 < g <= 1");
    if (!(residual > 0.0 && residual < 1.0)) throw std::invalid_argument("residual must be in (0,1)");
    if (g == 1.0) return point_mass(1);
    const double keep = 1.0 - g;
    const int phi = std::max(1, static_cast<int>(std::ceil(std::log(residual) / std::log(keep))));
    std::vector<double> probs(static_cast<std::size_t>(phi));
    double mass = g;
    for (auto& p : probs) {
        p = mass;
        mass *= keep;
    }
    return from_weights(std::move(probs));
}

double HopCountPmf::operator()(int l) const noexcept {
    if (l < 1 || l > phi()) return 0.0;
    return probs_[static_cast<std::size_t>(l - 1)];
}

// ---------------------------------------------------------------------------
// Rates and moments

RateAllocation RateAllocation::from_rates(std::vector<double> rates) {
    RateAllocation out;
    double lambda = 0.0;
    double theta = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!(rates[i] >= 0.0) || !std::isfinite(rates[i])) {
            throw std::invalid_argument("rates must be finite and non-negative");
        }
        lambda += rates[i];
        theta += static_cast<double>(i + 1) * rates[i];
    }
    out.rates = std::move(rates);
    out.lambda_total = lambda;
    out.theta = theta;
    return out;
}

HopCountPmf pmf_from_rates(const RateAllocation& alloc) {
    if (!(alloc.lambda_total > 0.0)) {
        throw DegenerateAllocationError("rate allocation has zero total rate");
    }
    return HopCountPmf::from_weights(alloc.rates);
}

DistanceStats distance_stats(const HopCountPmf& pmf) {
    DistanceStats s;
    const auto probs = pmf.probs();
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double l = static_cast<double>(i + 1);
        s.mean += l * probs[i];
        s.second_moment += l * l * probs[i];
    }
    double var = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double d = static_cast<double>(i + 1) - s.mean;
        var += d * d * probs[i];
    }
    s.variance = var;
    s.residual_mean = (s.second_moment + s.mean) / (2.0 * s.mean);
    s.workload_bias = s.residual_mean / s.mean;
    return s;
}

double hop_polynomial(const HopCountPmf& pmf, double y) {
    // Horner from the top coefficient: sum_l f(l) y^l = y (f1 + y (f2 + ...)).
    const auto probs = pmf.probs();
    double acc = 0.0;
    for (auto it = probs.rbegin(); it != probs.rend(); ++it) acc = acc * y + *it;
    return acc * y;
}

double mgf_L(const HopCountPmf& pmf, double z) {
    if (!(z >= 0.0 && z <= 1.0)) throw DomainError("mgf_L: z must lie in [0, 1]");
    return hop_polynomial(pmf, z);
}

double residual_mgf_L(const HopCountPmf& pmf, double z) {
    if (!(z >= 0.0 && z <= 1.0)) throw DomainError("residual_mgf_L: z must lie in [0, 1]");
    // (1/E[L]) sum_l f(l) (z + z^2 + ... + z^l); the inner sums are prefix sums of
    // powers of z, accumulated once.
    const auto probs = pmf.probs();
    double mean = 0.0;
    double acc = 0.0;
    double power = 1.0;
    double prefix = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        power *= z;
        prefix += power;
        acc += probs[i] * prefix;
        mean += static_cast<double>(i + 1) * probs[i];
    }
    return acc / mean;
}

// ---------------------------------------------------------------------------
// Scalability

ScalabilityVerdict classify_scalability(const RateFamily& family, int m_max,
                                        std::span<const long> phi_schedule, double tol) {
    if (phi_schedule.size() < 3) throw std::invalid_argument("phi schedule needs at least 3 entries");
    if (!std::is_sorted(phi_schedule.begin(), phi_schedule.end()) ||
        std::adjacent_find(phi_schedule.begin(), phi_schedule.end()) != phi_schedule.end()) {
        throw std::invalid_argument("phi schedule must be strictly increasing");
    }
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    if (m_max < 1) throw std::invalid_argument("m_max must be >= 1");

    ScalabilityVerdict verdict;
    for (long phi : phi_schedule) {
        const RateAllocation alloc = family(phi);
        ScalabilityEvidence row{phi, std::vector<double>(static_cast<std::size_t>(m_max), 0.0)};
        double running = 0.0;
        for (int m = 1; m <= m_max; ++m) {
            if (static_cast<std::size_t>(m) <= alloc.rates.size()) {
                running += m * alloc.rates[static_cast<std::size_t>(m - 1)];
            }
            row.partial_sums[static_cast<std::size_t>(m - 1)] = running;
        }
        verdict.evidence.push_back(std::move(row));
    }

    const auto& last = verdict.evidence[verdict.evidence.size() - 1].partial_sums;
    const auto& prev = verdict.evidence[verdict.evidence.size() - 2].partial_sums;
    for (int m = 1; m <= m_max; ++m) {
        const double s_last = last[static_cast<std::size_t>(m - 1)];
        const double s_prev = prev[static_cast<std::size_t>(m - 1)];
        if (s_last > tol && std::abs(s_last - s_prev) < tol / 10.0) {
            verdict.scalable = true;
            verdict.witness_M = m;
            break;
        }
    }
    return verdict;
}

namespace families {

RateFamily uniform(double lambda0) {
    return [lambda0](long phi) {
        return RateAllocation::from_rates(
            std::vector<double>(static_cast<std::size_t>(phi), lambda0 / static_cast<double>(phi)));
    };
}

RateFamily fixed_support(double lambda0, std::vector<double> alpha) {
    return [lambda0, alpha = std::move(alpha)](long phi) {
        std::vector<double> rates(static_cast<std::size_t>(phi), 0.0);
        const std::size_t n = std::min(rates.size(), alpha.size());
        for (std::size_t i = 0; i < n; ++i) rates[i] = lambda0 * alpha[i];
        return RateAllocation::from_rates(std::move(rates));
    };
}

RateFamily geometric_over_l(double lambda0, double g) {
    return [lambda0, g](long phi) {
        std::vector<double> rates(static_cast<std::size_t>(phi));
        double mass = g;
        for (std::size_t i = 0; i < rates.size(); ++i) {
            rates[i] = lambda0 * mass / static_cast<double>(i + 1);
            mass *= 1.0 - g;
        }
        return RateAllocation::from_rates(std::move(rates));
    };
}

RateFamily equal_probability_destination(double lambda0) {
    return [lambda0](long phi) {
        const double norm = static_cast<double>(phi) * static_cast<double>(phi + 1) / 2.0;
        std::vector<double> rates(static_cast<std::size_t>(phi));
        for (std::size_t i = 0; i < rates.size(); ++i) {
            rates[i] = static_cast<double>(i + 1) * lambda0 / norm;
        }
        return RateAllocation::from_rates(std::move(rates));
    };
}

}  // namespace families

// ---------------------------------------------------------------------------
// Scaling laws

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// E[L^k] / E[L^0] for densities proportional to l^alpha exp(-beta l^power).
double gamma_moment(double shape, double k_over_power, double beta_scale) {
    return std::exp(std::lgamma(shape + k_over_power) - std::lgamma(shape)) / beta_scale;
}

// 1 - w sqrt(pi) e^{w^2} erfc(w), the Rayleigh MGF at t = -sqrt(2) w / sigma.
double rayleigh_mgf_negative(double w) {
    if (w < 25.0) {
        return 1.0 - w * std::sqrt(std::numbers::pi) * std::exp(w * w) * std::erfc(w);
    }
    const double r = 1.0 / (w * w);
    return r * (0.5 - r * (0.75 - r * (1.875 - r * 6.5625)));
}

double lower_support(const ScalingLaw& law) {
    if (const auto* p = std::get_if<PowerLaw>(&law)) return p->epsilon;
    return 0.0;
}

}  // namespace

void validate(const ScalingLaw& law) {
    std::visit(overloaded{
                   [](const PowerLaw& p) {
                       if (!(p.alpha < -1.0)) throw std::invalid_argument("power law needs alpha < -1");
                       if (!(p.epsilon > 0.0)) throw std::invalid_argument("power law needs epsilon > 0");
                   },
                   [](const ExponentialLaw& e) {
                       if (!(e.beta > 0.0 && e.alpha > -1.0)) {
                           throw std::invalid_argument("exponential law needs beta > 0, alpha > -1");
                       }
                   },
                   [](const NormalLaw& n) {
                       if (!(n.beta > 0.0 && n.alpha > -1.0)) {
                           throw std::invalid_argument("normal law needs beta > 0, alpha > -1");
                       }
                   },
                   [](const RayleighLaw& r) {
                       if (!(r.sigma > 0.0)) throw std::invalid_argument("rayleigh law needs sigma > 0");
                   },
                   [](const GeometricLaw& g) {
                       if (!(g.g > 0.0 && g.g <= 1.0)) throw std::invalid_argument("geometric law needs 0 < g <= 1");
                   },
               },
               law);
}

ScalingLawStats scaling_law_stats(const ScalingLaw& law) {
    validate(law);
    ScalingLawStats s;
    std::visit(
        overloaded{
            [&s](const PowerLaw& p) {
                const double a = p.alpha;
                const double eps = p.epsilon;
                s.c0 = -(1.0 + a) * std::pow(eps, -(1.0 + a));
                if (a < -2.0) s.mean = (1.0 + a) * eps / (2.0 + a);
                if (a < -3.0) {
                    s.second_moment = (1.0 + a) * eps * eps / (3.0 + a);
                    s.workload_bias = (a + 2.0) * (a + 2.0) / (2.0 * (a + 1.0) * (a + 3.0));
                }
                const double c0 = s.c0;
                s.mgf = [a, eps, c0](double z) {
                    if (!(z >= 0.0 && z <= 1.0)) throw DomainError("scaling-law mgf: z must lie in [0, 1]");
                    if (z == 0.0) return 0.0;
                    if (z == 1.0) return 1.0;
                    const double t = std::log(z);
                    boost::math::quadrature::exp_sinh<double> integrator;
                    // Shift to [0, inf): c0 (eps + s)^a e^{t (eps + s)}.
                    auto f = [=](double shift) { return c0 * std::pow(eps + shift, a) * std::exp(t * (eps + shift)); };
                    return integrator.integrate(f);
                };
            },
            [&s](const ExponentialLaw& e) {
                const double shape = e.alpha + 1.0;
                s.c0 = std::exp(shape * std::log(e.beta) - std::lgamma(shape));
                s.mean = gamma_moment(shape, 1.0, e.beta);
                s.second_moment = gamma_moment(shape, 2.0, e.beta * e.beta);
                s.workload_bias = *s.second_moment / (2.0 * *s.mean * *s.mean);
                s.mgf = [shape, beta = e.beta](double z) {
                    if (!(z >= 0.0 && z <= 1.0)) throw DomainError("scaling-law mgf: z must lie in [0, 1]");
                    if (z == 0.0) return 0.0;
                    return std::pow(beta / (beta - std::log(z)), shape);
                };
            },
            [&s](const NormalLaw& n) {
                const double shape = (n.alpha + 1.0) / 2.0;
                s.c0 = 2.0 * std::exp(shape * std::log(n.beta) - std::lgamma(shape));
                s.mean = gamma_moment(shape, 0.5, std::sqrt(n.beta));
                s.second_moment = gamma_moment(shape, 1.0, n.beta);
                s.workload_bias = *s.second_moment / (2.0 * *s.mean * *s.mean);
                const double c0 = s.c0;
                s.mgf = [c0, alpha = n.alpha, beta = n.beta](double z) {
                    if (!(z >= 0.0 && z <= 1.0)) throw DomainError("scaling-law mgf: z must lie in [0, 1]");
                    if (z == 0.0) return 0.0;
                    if (z == 1.0) return 1.0;
                    const double t = std::log(z);
                    boost::math::quadrature::exp_sinh<double> integrator;
                    auto f = [=](double l) { return c0 * std::pow(l, alpha) * std::exp(-beta * l * l + t * l); };
                    return integrator.integrate(f);
                };
            },
            [&s](const RayleighLaw& r) {
                const double sigma = r.sigma;
                s.c0 = 1.0 / (sigma * sigma);
                s.mean = sigma * std::sqrt(std::numbers::pi / 2.0);
                s.second_moment = 2.0 * sigma * sigma;
                s.workload_bias = *s.second_moment / (2.0 * *s.mean * *s.mean);
                s.mgf = [sigma](double z) {
                    if (!(z >= 0.0 && z <= 1.0)) throw DomainError("scaling-law mgf: z must lie in [0, 1]");
                    if (z == 0.0) return 0.0;
                    // M_L(e^t) = 1 + sigma t e^{sigma^2 t^2 / 2} sqrt(pi/2) (erf(sigma t / sqrt 2) + 1)
                    const double w = -sigma * std::log(z) / std::numbers::sqrt2;
                    return rayleigh_mgf_negative(w);
                };
            },
            [&s](const GeometricLaw& g) {
                s.c0 = g.g;
                s.mean = 1.0 / g.g;
                s.second_moment = (2.0 - g.g) / (g.g * g.g);
                s.workload_bias = (*s.second_moment + *s.mean) / (2.0 * *s.mean * *s.mean);
                s.mgf = [gg = g.g](double z) {
                    if (!(z >= 0.0 && z <= 1.0)) throw DomainError("scaling-law mgf: z must lie in [0, 1]");
                    return gg * z / (1.0 - (1.0 - gg) * z);
                };
            },
        },
        law);
    return s;
}

double scaling_law_cdf(const ScalingLaw& law, double x) {
    validate(law);
    return std::visit(
        overloaded{
            [x](const PowerLaw& p) {
                if (x <= p.epsilon) return 0.0;
                return 1.0 - std::pow(x / p.epsilon, 1.0 + p.alpha);
            },
            [x](const ExponentialLaw& e) {
                if (x <= 0.0) return 0.0;
                return boost::math::gamma_p(e.alpha + 1.0, e.beta * x);
            },
            [x](const NormalLaw& n) {
                if (x <= 0.0) return 0.0;
                return boost::math::gamma_p((n.alpha + 1.0) / 2.0, n.beta * x * x);
            },
            [x](const RayleighLaw& r) {
                if (x <= 0.0) return 0.0;
                return -std::expm1(-x * x / (2.0 * r.sigma * r.sigma));
            },
            [x](const GeometricLaw& g) {
                if (x < 1.0) return 0.0;
                return 1.0 - std::pow(1.0 - g.g, std::floor(x));
            },
        },
        law);
}

double alpha_for_region(double r_t, double epsilon, double coverage) {
    if (!(epsilon > 0.0)) throw DomainError("alpha_for_region: epsilon must be positive");
    if (!(r_t > epsilon)) throw DomainError("alpha_for_region: r_t must exceed epsilon");
    if (!(coverage > 0.0 && coverage < 1.0)) throw DomainError("alpha_for_region: coverage must lie in (0, 1)");
    return std::log1p(-coverage) / std::log(r_t / epsilon) - 1.0;
}

std::optional<double> power_law_relative_throughput(double alpha) {
    if (!(alpha < -2.0)) return std::nullopt;
    return 1.0 + 1.0 / (1.0 + alpha);
}

HopCountPmf scaling_law_discretize(const ScalingLaw& law, int phi) {
    validate(law);
    if (phi < 1) throw std::invalid_argument("discretize: phi must be >= 1");
    std::vector<double> probs(static_cast<std::size_t>(phi), 0.0);

    if (const auto* g = std::get_if<GeometricLaw>(&law)) {
        double mass = g->g;
        for (int l = 1; l < phi; ++l) {
            probs[static_cast<std::size_t>(l - 1)] = mass;
            mass *= 1.0 - g->g;
        }
        probs.back() = std::pow(1.0 - g->g, phi - 1);
        return HopCountPmf::from_weights(std::move(probs));
    }

    const double lo = lower_support(law);
    for (int l = 1; l <= phi; ++l) {
        const double left = std::max(lo, l - 0.5);
        const double right = l + 0.5;
        if (right <= left) continue;
        const double hi_cdf = (l == phi) ? 1.0 : scaling_law_cdf(law, right);
        probs[static_cast<std::size_t>(l - 1)] = std::max(0.0, hi_cdf - scaling_law_cdf(law, left));
    }
    return HopCountPmf::from_weights(std::move(probs));
}

// ---------------------------------------------------------------------------
// Mini-language

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view s, std::string_view context) {
    s = trim(s);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError(fmt::format("{}: '{}' is not a number", context, s));
    }
    return value;
}

void expect_args(std::string_view kind, const std::vector<std::string_view>& parts, std::size_t n) {
    if (parts.size() != n + 1) {
        throw ConfigError(fmt::format("distribution '{}' expects {} parameter(s)", kind, n));
    }
}

}  // namespace

DistSpec parse_dist_spec(std::string_view text) {
    text = trim(text);
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw ConfigError(fmt::format("distribution '{}' has no kind prefix", text));
    }
    const std::string_view kind = text.substr(0, colon);
    DistSpec spec{HopCountPmf::point_mass(1), std::string(text)};

    try {
        if (kind == "explicit") {
            std::string_view body = trim(text.substr(colon + 1));
            if (!body.empty() && body.front() == '[') body.remove_prefix(1);
            if (!body.empty() && body.back() == ']') body.remove_suffix(1);
            std::vector<double> weights;
            for (auto item : split(body, ',')) weights.push_back(parse_number(item, "explicit"));
            spec.value = HopCountPmf::from_weights(std::move(weights));
            return spec;
        }
        const auto parts = split(text, ':');
        if (kind == "geometric") {
            expect_args(kind, parts, 1);
            ScalingLaw law = GeometricLaw{parse_number(parts[1], kind)};
            validate(law);
            spec.value = law;
        } else if (kind == "uniform") {
            expect_args(kind, parts, 1);
            const double phi = parse_number(parts[1], kind);
            if (phi < 1.0 || phi != std::floor(phi)) throw ConfigError("uniform: phi must be a positive integer");
            spec.value = HopCountPmf::uniform(static_cast<int>(phi));
        } else if (kind == "power") {
            expect_args(kind, parts, 2);
            ScalingLaw law = PowerLaw{parse_number(parts[1], kind), parse_number(parts[2], kind)};
            validate(law);
            spec.value = law;
        } else if (kind == "rayleigh") {
            expect_args(kind, parts, 1);
            ScalingLaw law = RayleighLaw{parse_number(parts[1], kind)};
            validate(law);
            spec.value = law;
        } else {
            throw ConfigError(fmt::format("unknown distribution kind '{}'", kind));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(fmt::format("distribution '{}': {}", text, e.what()));
    }
    return spec;
}

HopCountPmf to_pmf(const DistSpec& spec, int phi_continuous) {
    if (const auto* pmf = std::get_if<HopCountPmf>(&spec.value)) return *pmf;
    const auto& law = std::get<ScalingLaw>(spec.value);
    if (const auto* g = std::get_if<GeometricLaw>(&law)) return HopCountPmf::geometric(g->g);
    return scaling_law_discretize(law, phi_continuous);
}

std::string format_explicit(std::span<const double> weights) {
    std::string out = "explicit:[";
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (i > 0) out += ',';
        out += fmt::format("{:.12g}", weights[i]);
    }
    out += ']';
    return out;
}

}  // namespace mrnet
