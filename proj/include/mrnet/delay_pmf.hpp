#pragma once

#include <cstdint>
#include <vector>

namespace mrnet {

/// Truncated pmf of an integer delay: masses[i] = Pr{delay = offset + i}, plus the
/// probability mass that was cut off and not placed on any support point.
struct DelayPmf {
    std::int64_t offset = 1;
    std::vector<double> masses;
    double residual_tail = 0.0;

    [[nodiscard]] double at(std::int64_t k) const noexcept {
        const std::int64_t i = k - offset;
        if (i < 0 || i >= static_cast<std::int64_t>(masses.size())) return 0.0;
        return masses[static_cast<std::size_t>(i)];
    }
    [[nodiscard]] std::int64_t last() const noexcept {
        return offset + static_cast<std::int64_t>(masses.size()) - 1;
    }
    /// Sum of the placed masses.
    [[nodiscard]] double placed_mass() const noexcept {
        double s = 0.0;
        for (double m : masses) s += m;
        return s;
    }
    /// Raw moment of order 1 or 2 over the placed masses only.
    [[nodiscard]] double moment(int order) const noexcept {
        double s = 0.0;
        for (std::size_t i = 0; i < masses.size(); ++i) {
            const double k = static_cast<double>(offset + static_cast<std::int64_t>(i));
            s += masses[i] * (order == 1 ? k : k * k);
        }
        return s;
    }
};

}  // namespace mrnet
