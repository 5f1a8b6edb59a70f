#pragma once

#include <vector>

namespace mrnet {

/// Dense polynomial, coefficients in ascending order of power.
struct Polynomial {
    std::vector<double> coeffs;

    [[nodiscard]] double operator()(double z) const noexcept {
        double acc = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * z + *it;
        return acc;
    }

    [[nodiscard]] Polynomial derivative() const {
        Polynomial d;
        for (std::size_t k = 1; k < coeffs.size(); ++k) d.coeffs.push_back(static_cast<double>(k) * coeffs[k]);
        return d;
    }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        if (a.coeffs.empty() || b.coeffs.empty()) return {};
        Polynomial out{std::vector<double>(a.coeffs.size() + b.coeffs.size() - 1, 0.0)};
        for (std::size_t i = 0; i < a.coeffs.size(); ++i)
            for (std::size_t j = 0; j < b.coeffs.size(); ++j) out.coeffs[i + j] += a.coeffs[i] * b.coeffs[j];
        return out;
    }

    friend Polynomial operator-(const Polynomial& a, const Polynomial& b) {
        Polynomial out{std::vector<double>(std::max(a.coeffs.size(), b.coeffs.size()), 0.0)};
        for (std::size_t i = 0; i < a.coeffs.size(); ++i) out.coeffs[i] += a.coeffs[i];
        for (std::size_t i = 0; i < b.coeffs.size(); ++i) out.coeffs[i] -= b.coeffs[i];
        return out;
    }
};

/// num(z) / den(z). Derivatives are taken symbolically by the quotient rule, which
/// keeps moment computations exact near poles where finite differences break down.
struct RationalFunction {
    Polynomial num;
    Polynomial den;

    [[nodiscard]] double operator()(double z) const noexcept { return num(z) / den(z); }

    [[nodiscard]] RationalFunction derivative() const {
        return {num.derivative() * den - num * den.derivative(), den * den};
    }
};

}  // namespace mrnet
