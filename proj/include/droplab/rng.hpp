#pragma once

// Counter-based random numbers (Philox4x32-10).  Every Gaussian draw is a
// pure function of (seed, stream, path, step, index), so ensembles are
// bit-reproducible regardless of scheduling and paths can be resumed
// mid-stream from a checkpoint.

#include <array>
#include <cstdint>

namespace droplab::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

// One Philox-4x32 round pair of multipliers and the Weyl key schedule.
Counter philox4x32(Counter ctr, Key key);

// Uniform double in (0,1) from two 32-bit words (53-bit mantissa, never 0).
double uniform_from_bits(std::uint32_t hi, std::uint32_t lo);

// Two independent standard normals from one counter block (Box-Muller).
std::array<double, 2> normal_pair(Key key, Counter ctr);

// Named sub-streams; values are arbitrary but fixed, so that distinct uses
// of one seed never collide.
enum class Stream : std::uint32_t {
    spde_noise = 1,
    initial_condition = 2,
    reduced_sde = 3,
    test_fields = 4,
};

struct NormalStream {
    Key key;
    std::uint32_t stream;
    std::uint32_t path;

    NormalStream(std::uint64_t seed, Stream s, std::uint32_t path_index)
        : key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream(static_cast<std::uint32_t>(s)),
          path(path_index) {}

    // i-th standard normal attached to a given step (step must fit 32 bits).
    // Draws are generated in pairs; consecutive indices share a Philox block.
    double normal(std::uint64_t step, std::uint32_t i) const {
        const Counter c{stream, path, static_cast<std::uint32_t>(step), i >> 1};
        return normal_pair(key, c)[i & 1];
    }
};

}  // namespace droplab::rng
