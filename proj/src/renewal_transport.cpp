#include "mrnet/renewal_transport.hpp"

#include "mrnet/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mrnet {

Eigen::MatrixXd transition_matrix(const HopCountPmf& pmf) {
    const int phi = pmf.phi();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(phi, phi);
    for (int l = 1; l <= phi; ++l) p(0, l - 1) = pmf(l);
    for (int i = 1; i < phi; ++i) p(i, i - 1) = 1.0;
    return p;
}

std::vector<double> embedded_limits(const HopCountPmf& pmf) {
    const auto probs = pmf.probs();
    const double mean = distance_stats(pmf).mean;
    std::vector<double> pi(probs.size());
    double tail = 0.0;
    for (std::size_t i = probs.size(); i-- > 0;) {
        tail += probs[i];
        pi[i] = tail / mean;
    }
    return pi;
}

TransportStats transport_stats(const TransportModel& model) {
    const DistanceStats ls = distance_stats(model.pmf);
    const MgfStats ts = perhop_stats(model.hop);

    TransportStats out;
    out.mean = ls.mean * ts.mean;
    out.second_moment = ls.second_moment * ts.mean * ts.mean + ls.mean * ts.variance;
    out.variance = out.second_moment - out.mean * out.mean;
    out.residual_mean = (out.second_moment + out.mean) / (2.0 * out.mean);
    out.residual_mean_decomposed =
        (ls.second_moment * ts.mean + ls.mean * (ts.variance / ts.mean + 1.0)) / (2.0 * ls.mean);

    const HopCountPmf pmf = model.pmf;
    const auto mt = ts.mgf;
    out.mgf = [pmf, mt](double z) { return hop_polynomial(pmf, mt(z)); };

    // z (1 - M_L(y)) / ((1 - z) E[D]) with y = M_T(z), rewritten as
    // z / E[D] * sum_l f_L(l) (1 + y + ... + y^(l-1)) * (1 - M_T(z)) / (1 - z)
    // where the last factor is 1 + beta2 c z / (1 - c z); no cancellation at z = 1.
    const double beta2 = model.hop.deterministic() ? 0.0 : model.hop.beta2();
    const double c = model.hop.c();
    const double mean_d = out.mean;
    out.residual_mgf = [pmf, mt, beta2, c, mean_d](double z) {
        const double y = mt(z);
        double partial = 0.0;  // 1 + y + ... + y^(l-1)
        double power = 1.0;
        double acc = 0.0;
        for (int l = 1; l <= pmf.phi(); ++l) {
            partial += power;
            power *= y;
            acc += pmf(l) * partial;
        }
        const double hop_factor = 1.0 + beta2 * c * z / (1.0 - c * z);
        return z * acc * hop_factor / mean_d;
    };
    return out;
}

FlowRelations flow_relations(double theta, double mean_L, double mean_T, double n) {
    if (!(mean_L >= 1.0)) throw std::invalid_argument("E[L] must be at least 1");
    FlowRelations out;
    out.lambda = theta / mean_L;
    out.mean_D = out.lambda > 0.0 ? theta * mean_T / out.lambda : mean_L * mean_T;
    out.population_nd = n * out.lambda * out.mean_D;
    out.population_nt = n * theta * mean_T;
    return out;
}

FlowRelations flow_relations(const HopCountPmf& pmf, const AlohaHopModel& hop, double n) {
    return flow_relations(hop.theta(), distance_stats(pmf).mean, hop.mean_T(), n);
}

Dispersion dispersion_varY(const HopCountPmf& pmf, const AlohaHopModel& hop) {
    double inv_l = 0.0;
    for (int l = 1; l <= pmf.phi(); ++l) inv_l += pmf(l) / l;
    return {hop.mean_T(), hop.var_T() * inv_l};
}

// ---------------------------------------------------------------------------

namespace {

struct Support {
    std::int64_t offset = 0;
    std::vector<double> m;
};

Support convolve(const Support& a, const DelayPmf& b) {
    Support out;
    out.offset = a.offset + b.offset;
    out.m.assign(a.m.size() + b.masses.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.m.size(); ++i) {
        const double ai = a.m[i];
        if (ai == 0.0) continue;
        double* dst = out.m.data() + i;
        for (std::size_t j = 0; j < b.masses.size(); ++j) dst[j] += ai * b.masses[j];
    }
    return out;
}

// Drops negligible edge masses and everything past the cap; returns the dropped mass.
double trim(Support& s, double threshold, long cap) {
    double dropped = 0.0;
    const std::int64_t max_len = std::max<std::int64_t>(0, cap - s.offset + 1);
    if (static_cast<std::int64_t>(s.m.size()) > max_len) {
        for (std::size_t i = static_cast<std::size_t>(max_len); i < s.m.size(); ++i) dropped += s.m[i];
        s.m.resize(static_cast<std::size_t>(max_len));
    }
    while (!s.m.empty() && s.m.back() < threshold) {
        dropped += s.m.back();
        s.m.pop_back();
    }
    std::size_t lead = 0;
    while (lead < s.m.size() && s.m[lead] < threshold) dropped += s.m[lead++];
    if (lead > 0) {
        s.m.erase(s.m.begin(), s.m.begin() + static_cast<std::ptrdiff_t>(lead));
        s.offset += static_cast<std::int64_t>(lead);
    }
    return dropped;
}

void check_hop_pmf(const DelayPmf& hop) {
    if (hop.masses.empty()) throw std::invalid_argument("per-hop pmf is empty");
    if (hop.offset < 1) throw std::invalid_argument("per-hop delay must be at least one slot");
    if (!(hop.residual_tail < 1e-9)) {
        throw PrecisionError(fmt::format("per-hop pmf leaves {:.3g} mass untruncated; need < 1e-9", hop.residual_tail));
    }
}

// Largest value of omega x - ln sum_k m_k e^(omega k) over a fixed omega grid. Any
// omega > 0 gives a valid Chernoff exponent, so the grid only affects tightness.
double chernoff_exponent(const DelayPmf& hop, double x) {
    const double k_max = static_cast<double>(hop.last());
    double best = 0.0;
    for (int i = 0; i <= 400; ++i) {
        const double omega = 1e-4 * std::pow(5e4, i / 400.0);
        double s = 0.0;
        for (std::size_t k = 0; k < hop.masses.size(); ++k) {
            const double kk = static_cast<double>(hop.offset + static_cast<std::int64_t>(k));
            s += hop.masses[k] * std::exp(omega * (kk - k_max));
        }
        const double log_mgf = omega * k_max + std::log(s);
        best = std::max(best, omega * x - log_mgf);
    }
    return best;
}

}  // namespace

DelayPmf transport_pmf_oracle(const HopCountPmf& pmf, const DelayPmf& hop_pmf, const OracleOptions& options) {
    check_hop_pmf(hop_pmf);
    const double hop_mass = hop_pmf.placed_mass();

    DelayPmf out;
    out.offset = hop_pmf.offset;
    double lost = 0.0;

    Support cur{hop_pmf.offset, hop_pmf.masses};
    double cur_mass = hop_mass;
    cur_mass -= trim(cur, options.trim_threshold, options.support_cap);
    for (int l = 1; l <= pmf.phi(); ++l) {
        if (l > 1) {
            cur = convolve(cur, hop_pmf);
            cur_mass = cur_mass * hop_mass - trim(cur, options.trim_threshold, options.support_cap);
        }
        const double f = pmf(l);
        if (f == 0.0) continue;
        if (cur.m.empty()) {
            lost += f;
            continue;
        }
        const std::size_t base = static_cast<std::size_t>(cur.offset - out.offset);
        if (out.masses.size() < base + cur.m.size()) out.masses.resize(base + cur.m.size(), 0.0);
        for (std::size_t i = 0; i < cur.m.size(); ++i) out.masses[base + i] += f * cur.m[i];
        lost += f * (1.0 - cur_mass);
    }
    out.residual_tail = std::max(0.0, lost);
    if (out.residual_tail > options.max_lost_mass) {
        throw PrecisionError(fmt::format("transport pmf lost {:.3g} probability mass (limit {:.3g})",
                                         out.residual_tail, options.max_lost_mass));
    }
    return out;
}

std::vector<ProbabilityBracket> transport_exceedance_oracle(const HopCountPmf& pmf, const DelayPmf& hop_pmf,
                                                            std::span<const double> xs, double rel_tol) {
    check_hop_pmf(hop_pmf);
    for (double x : xs) {
        if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("exceedance threshold x must be positive");
    }
    const int phi = pmf.phi();
    const double hop_mass = hop_pmf.placed_mass();
    const std::size_t nx = xs.size();

    // tail_bound[j][l] bounds sum_{l' > l} f_L(l') Pr{S_l' > l' x_j} for the exact law.
    std::vector<std::vector<double>> tail_bound(nx, std::vector<double>(static_cast<std::size_t>(phi) + 1, 0.0));
    for (std::size_t j = 0; j < nx; ++j) {
        const double rate = chernoff_exponent(hop_pmf, xs[j]);
        auto& tb = tail_bound[j];
        for (int l = phi; l >= 1; --l) {
            const double missing = -std::expm1(l * std::log(hop_mass));
            const double chernoff = std::exp(-l * rate);
            tb[static_cast<std::size_t>(l) - 1] = tb[static_cast<std::size_t>(l)] +
                                                   pmf(l) * std::min(1.0, chernoff + missing);
        }
    }

    std::vector<ProbabilityBracket> out(nx);
    Support cur{hop_pmf.offset, hop_pmf.masses};
    double cur_mass = hop_mass;
    std::vector<double> suffix;
    int l_done = 0;
    for (int l = 1; l <= phi; ++l) {
        if (l > 1) {
            cur = convolve(cur, hop_pmf);
            cur_mass = cur_mass * hop_mass - trim(cur, 1e-40, std::numeric_limits<long>::max());
        }
        l_done = l;
        const double f = pmf(l);
        if (f > 0.0) {
            suffix.assign(cur.m.size() + 1, 0.0);
            for (std::size_t i = cur.m.size(); i-- > 0;) suffix[i] = suffix[i + 1] + cur.m[i];
            for (std::size_t j = 0; j < nx; ++j) {
                const auto m = static_cast<std::int64_t>(std::floor(l * xs[j])) + 1;  // S_l >= m
                const std::int64_t idx = std::clamp<std::int64_t>(m - cur.offset, 0,
                                                                  static_cast<std::int64_t>(cur.m.size()));
                const double p = suffix[static_cast<std::size_t>(idx)];
                out[j].lo += f * p;
                out[j].hi += f * (p + std::max(0.0, 1.0 - cur_mass));
            }
        }
        bool done = true;
        for (std::size_t j = 0; j < nx && done; ++j) {
            done = tail_bound[j][static_cast<std::size_t>(l)] <= rel_tol * out[j].lo;
        }
        if (done) break;
    }
    for (std::size_t j = 0; j < nx; ++j) {
        out[j].hi = std::min(1.0, out[j].hi + tail_bound[j][static_cast<std::size_t>(l_done)]);
    }
    return out;
}

ProbabilityBracket transport_exceedance_oracle(const HopCountPmf& pmf, const DelayPmf& hop_pmf, double x,
                                               double rel_tol) {
    const double xs[] = {x};
    return transport_exceedance_oracle(pmf, hop_pmf, xs, rel_tol).front();
}

}  // namespace mrnet
