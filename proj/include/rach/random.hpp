#pragma once

#include <cstdint>
#include <random>

namespace rach {

using Rng = std::mt19937_64;

/// Named sub-streams. Each concern of a run draws from its own generator so
/// that changing one part of the model (e.g. enabling contention resolution)
/// leaves every other sequence of draws untouched.
enum class Stream : std::uint64_t {
    Activation = 1,
    ClassAssignment = 2,
    Barring = 3,
    Preamble = 4,
    Priority = 5,
    Backoff = 6,
    Oracle = 7,
    Derived = 8,
};

inline Rng make_stream(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

/// A 64-bit seed for the `index`-th child of `seed` (replications, grid
/// points). Children of different parents do not collide in practice.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return make_stream(seed, Stream::Derived, index)();
}

/// Unbiased integer in [0, range) from a 32-bit word (Lemire's
/// multiply-shift with rejection). `Source` yields uint32_t.
template <typename Source>
std::uint32_t bounded(Source& next32, std::uint32_t range) {
    std::uint64_t m = std::uint64_t{next32()} * range;
    auto low = static_cast<std::uint32_t>(m);
    if (low < range) {
        const std::uint32_t threshold = static_cast<std::uint32_t>(-range) % range;
        while (low < threshold) {
            m = std::uint64_t{next32()} * range;
            low = static_cast<std::uint32_t>(m);
        }
    }
    return static_cast<std::uint32_t>(m >> 32);
}

/// Splits each 64-bit engine output into two 32-bit words.
class Word32Source {
public:
    explicit Word32Source(Rng& rng) : rng_(rng) {}

    std::uint32_t operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const std::uint64_t word = rng_();
        spare_ = static_cast<std::uint32_t>(word >> 32);
        have_spare_ = true;
        return static_cast<std::uint32_t>(word);
    }

private:
    Rng& rng_;
    std::uint32_t spare_ = 0;
    bool have_spare_ = false;
};

}  // namespace rach
