#pragma once

// Small random-instance generators for property tests. Each test seeds its own
// engine, so failures reproduce from the printed seed.

#include "mrnet/aloha_hop.hpp"
#include "mrnet/sd_distance.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace mrnet::testgen {

using Engine = std::mt19937_64;

inline double uniform(Engine& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Engine& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Random pmf on {1..phi}; roughly a third of the classes are zeroed to exercise sparse supports.
inline HopCountPmf random_pmf(Engine& rng, int phi) {
    std::vector<double> w(static_cast<std::size_t>(phi));
    for (auto& x : w) x = uniform(rng, 0.0, 1.0) < 0.33 ? 0.0 : uniform(rng, 0.01, 1.0);
    w[static_cast<std::size_t>(uniform_int(rng, 0, phi - 1))] += 0.5;
    return HopCountPmf::from_weights(std::move(w));
}

inline std::vector<double> random_rates(Engine& rng, int phi) {
    std::vector<double> r(static_cast<std::size_t>(phi));
    for (auto& x : r) x = uniform(rng, 0.0, 0.05);
    r.front() += 1e-3;
    return r;
}

/// Stable hop model with p < 1. theta is drawn below 90% of the stability limit.
inline AlohaHopModel random_hop_model(Engine& rng) {
    const double p = uniform(rng, 0.3, 0.98);
    const double q = uniform(rng, 0.05, 1.0);
    const double mean_x = 1.0 + (1.0 - p) / (p * q);
    const double theta = uniform(rng, 0.0, 0.9) / mean_x;
    return AlohaHopModel(p, q, std::min(theta, 0.99));
}

}  // namespace mrnet::testgen
