#include "mrnet/rng.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace mrnet {

DiscreteSampler::DiscreteSampler(std::span<const double> masses, long offset) : offset_(offset) {
    if (masses.empty()) throw std::invalid_argument("DiscreteSampler: empty table");
    cdf_.resize(masses.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < masses.size(); ++i) {
        if (masses[i] < 0.0) throw std::invalid_argument("DiscreteSampler: negative mass");
        acc += masses[i];
        cdf_[i] = acc;
    }
    if (!(acc > 0.0)) throw std::invalid_argument("DiscreteSampler: zero total mass");
}

long DiscreteSampler::operator()(CounterRng& rng) const noexcept {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto idx = std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1);
    return offset_ + static_cast<long>(idx);
}

}  // namespace mrnet
