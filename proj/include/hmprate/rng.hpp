#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "hmprate/util.hpp"

namespace hmprate {

/// Counter-based pseudo-random stream. Every output is a pure function of
/// (seed, stream, counter), so work split across threads by stream index
/// reproduces the exact same numbers for any worker count.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(derive_key(seed, stream)) {}

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1]; safe as a log() argument.
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; consumes two uniforms per pair.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = uniform_pos();
        const double v = uniform();
        const double r = std::sqrt(-2.0 * std::log(u));
        spare_ = r * std::sin(kTwoPi * v);
        have_spare_ = true;
        return r * std::cos(kTwoPi * v);
    }

    /// Index draw from a finite distribution (any Eigen vector-like expression).
    /// Entries must be nonnegative and sum to ~1; zero entries are never chosen.
    template <typename Derived>
    int categorical(const Eigen::DenseBase<Derived>& probs) {
        const double u = uniform();
        double acc = 0.0;
        int last = 0;
        for (int k = 0; k < static_cast<int>(probs.size()); ++k) {
            const double p = probs(k);
            if (p <= 0.0) continue;
            last = k;
            acc += p;
            if (u < acc) return k;
        }
        return last;
    }

  private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
        return mix(mix(seed + kGamma) ^ (stream * 0xD2B74407B1CE6E93ull + 0x8CB92BA72F3D8DD7ull));
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hmprate
