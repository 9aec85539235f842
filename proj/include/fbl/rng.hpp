#pragma once

#include <cstdint>
#include <random>

namespace fbl {

/// Independent consumers of randomness. A path's stream is a pure function of
/// (root seed, domain, index), so the worker count never changes the samples.
enum class StreamDomain : std::uint64_t {
    LambdaPaths = 1,
    VhPaths = 2,
    UdotPaths = 3,
    HittingPaths = 4,
    BesselMarginal = 5,
    BesselConditional = 6,
    BesselMoments = 7,
    BesselLemmas = 8,
    BesselOracle = 9,
    Diagnostics = 10,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t substream_seed(std::uint64_t root, StreamDomain domain, std::uint64_t index) {
    const std::uint64_t d = splitmix64(root ^ splitmix64(static_cast<std::uint64_t>(domain)));
    return splitmix64(d + splitmix64(index));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, StreamDomain domain, std::uint64_t index) {
    return Rng(substream_seed(root, domain, index));
}

}  // namespace fbl
