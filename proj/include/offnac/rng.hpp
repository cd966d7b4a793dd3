#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace offnac {

/// Seedable random source used by every sampling routine in the library.
///
/// Generator family: std::mt19937_64 (fixed; do not change silently --
/// golden test files depend on the stream). Uniform doubles are built
/// from the top 53 bits of the raw output so results do not depend on
/// standard-library distribution internals.
///
/// Stream splitting: parallel runs draw independent streams from one
/// master seed via `for_stream(master, k)`, which seeds stream k with
/// splitmix64(master + (k+1) * 0x9E3779B97F4A7C15). Runs are reproducible
/// for a fixed (master, k) regardless of thread scheduling.
class SplitRng {
public:
    explicit SplitRng(std::uint64_t seed) : engine_(seed) {}

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    /// Seed of parallel stream `stream` under a master seed.
    static std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t stream) {
        return splitmix64(master_seed + (stream + 1) * 0x9E3779B97F4A7C15ULL);
    }

    /// Derive the RNG for parallel stream `stream` of a master seed.
    static SplitRng for_stream(std::uint64_t master_seed, std::uint64_t stream) {
        return SplitRng(stream_seed(master_seed, stream));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Unbiased uniform integer in [0, n).
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("bounded: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Sample an index from an (unnormalized-tolerant) probability vector
    /// by inverse CDF walk. The final index absorbs rounding slack.
    int categorical(std::span<const double> probs) {
        if (probs.empty()) throw std::invalid_argument("categorical: empty support");
        const double u = uniform01();
        double cum = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            cum += probs[i];
            if (u < cum) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size() - 1);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace offnac
