#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace flowal {

// Stream tags used to derive independent substreams from one experiment seed.
// Scores must not depend on evaluation order, so every consumer forks its own
// stream from (seed, tags...) instead of sharing a sequential generator.
enum StreamTag : std::uint64_t {
    kTagSeedSet = 1,
    kTagSplit = 2,
    kTagInit = 3,
    kTagShuffle = 4,
    kTagDropout = 5,
    kTagMask = 6,
    kTagSamples = 7,
    kTagEval = 8,
    kTagDataGen = 9,
    kTagRound = 10,
    kTagCandidate = 11,
    kTagAcquire = 12,
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

// Counter-style splitmix64 generator with cheap forking. A fork derives a new
// key from (parent key, tag) without consuming parent state, which keeps
// per-candidate streams identical whether candidates are scored serially or
// in parallel.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : key_(detail::mix64(seed)), state_(key_) {}

    RngStream fork(std::uint64_t tag) const {
        RngStream child(0);
        child.key_ = detail::mix64(key_ ^ (0x632BE59BD9B4E019ULL * (tag + 1)));
        child.state_ = child.key_;
        child.has_spare_ = false;
        return child;
    }

    template <typename... Tags>
    RngStream fork(std::uint64_t tag, Tags... rest) const {
        return fork(tag).fork(static_cast<std::uint64_t>(rest)...);
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Lemire reduction, n > 0.
    std::uint64_t uniform_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller. Hand-rolled so draws are identical
    // across standard libraries.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform() < p; }

  private:
    std::uint64_t key_;
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace flowal
