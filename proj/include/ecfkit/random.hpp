#pragma once

// Seedable random streams. The generator is a SplitMix64 counter stream:
// output i is mix64(key + (i + 1) * golden_gamma), so a stream is fully
// described by its 64-bit key. Sub-streams for replications, groups,
// subjects or permutations get keys from derive_seed(), which makes results
// independent of the order or thread in which the streams are consumed.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace ecfkit {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Stable 64-bit key for a child stream identified by (parent, a, b, c).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0) noexcept {
    std::uint64_t h = mix64(parent ^ 0x5851F42D4C957F2DULL);
    h = mix64(h + kGoldenGamma * (a + 1));
    h = mix64(h + kGoldenGamma * (b + 1) + 0x2545F4914F6CDD1DULL);
    h = mix64(h + kGoldenGamma * (c + 1) + 0x1B873593ULL);
    return h;
}

/// Counter-based SplitMix64 stream; satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterRng(std::uint64_t key = 0) noexcept : key_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        ++counter_;
        return mix64(key_ + counter_ * kGoldenGamma);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound), Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) noexcept {
        if (bound <= 1) return 0;
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal deviate (Marsaglia polar method, second value cached).
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// Central chi-square with an integer number of degrees of freedom.
    double chi_square(unsigned df) noexcept {
        double acc = 0.0;
        for (unsigned i = 0; i < df; ++i) {
            const double z = normal();
            acc += z * z;
        }
        return acc;
    }

    [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Fisher-Yates shuffle driven by CounterRng::below.
template <typename T>
void shuffle(std::span<T> values, CounterRng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(values[i - 1], values[j]);
    }
}

template <typename T>
void shuffle(std::vector<T>& values, CounterRng& rng) {
    shuffle(std::span<T>(values), rng);
}

}  // namespace ecfkit
