#pragma once

// Counter-based random numbers: draw k of stream s under key K is
// splitmix64(K ^ splitmix64(s) + k * golden), so every (key, stream, counter) triple
// maps to one fixed value regardless of how streams interleave.

#include <cstdint>
#include <span>
#include <vector>

namespace mrnet {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t key, std::uint64_t stream) noexcept
        : base_(key ^ splitmix64(stream ^ 0x6a09e667f3bcc909ULL)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return splitmix64(base_ + 0x9e3779b97f4a7c15ULL * counter_++); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) noexcept { return uniform() < p; }
    /// Uniform on {0, ..., n-1}; n > 0. Multiply-shift, bias below 2^-32 for n < 2^32.
    std::uint64_t below(std::uint64_t n) noexcept {
        __extension__ using u128 = unsigned __int128;
        return static_cast<std::uint64_t>((static_cast<u128>((*this)()) * n) >> 64);
    }

    [[nodiscard]] std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

/// Inverse-CDF sampler over {offset, offset+1, ...} from a table of masses.
class DiscreteSampler {
public:
    DiscreteSampler() = default;
    DiscreteSampler(std::span<const double> masses, long offset);

    /// Returns a value in [offset, offset + size); mass missing from the table
    /// (the table summing below one) maps to the last entry.
    long operator()(CounterRng& rng) const noexcept;

private:
    std::vector<double> cdf_;
    long offset_ = 1;
};

}  // namespace mrnet
