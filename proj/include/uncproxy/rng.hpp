#pragma once

// Portable random streams.
//
// Generator: xoshiro256** (Blackman & Vigna), state filled from a SplitMix64
// sequence started at the stream seed.
//
// Stream splitting: a stream is identified by a root seed plus an ordered list
// of 64-bit keys. The stream seed is
//
//     h0 = seed
//     h_{j+1} = mix64(h_j ^ mix64(key_j + 0x9E3779B97F4A7C15))
//
// where mix64 is the SplitMix64 output finalizer. Every random quantity in
// the library is drawn from a stream keyed by what it is for (a purpose tag)
// and where it is used (sample index, layer index, pass index), so results do
// not depend on evaluation order or thread count.
//
// Derived variates use only the bit stream, never <random> distributions,
// whose algorithms differ between standard libraries:
//   uniform01   (next() >> 11) * 2^-53, in [0, 1)
//   normal      Box-Muller, cosine branch, u1 taken as 1 - uniform01()
//   index(n)    floor(uniform01() * n)

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace uncproxy {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = seed;
    for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x9E3779B97F4A7C15ULL));
    return h;
}

// Purpose tags used as the first stream key.
namespace stream_tag {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t shuffle = 2;
inline constexpr std::uint64_t train_mask = 3;
inline constexpr std::uint64_t mc_pass = 4;
inline constexpr std::uint64_t synth_sample = 5;
inline constexpr std::uint64_t synth_ood = 6;
inline constexpr std::uint64_t predict_sample = 7;
}  // namespace stream_tag

class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t operator()() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

private:
    std::uint64_t state_;
};

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept;
    Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept
        : Rng(stream_seed(seed, keys)) {}

    std::uint64_t operator()() noexcept { return next(); }
    std::uint64_t next() noexcept;

    double uniform01() noexcept;
    double normal() noexcept;
    std::size_t index(std::size_t n) noexcept;
    bool bernoulli(double p_true) noexcept { return uniform01() < p_true; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

private:
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace uncproxy
