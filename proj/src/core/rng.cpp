#include "droplab/rng.hpp"

#include <cmath>

namespace droplab::rng {

namespace {
constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::uint32_t mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t* hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    *hi = static_cast<std::uint32_t>(p >> 32);
    return static_cast<std::uint32_t>(p);
}
}  // namespace

Counter philox4x32(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, hi1;
        const std::uint32_t lo0 = mulhilo(kPhiloxM0, ctr[0], &hi0);
        const std::uint32_t lo1 = mulhilo(kPhiloxM1, ctr[2], &hi1);
        ctr = Counter{hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

double uniform_from_bits(std::uint32_t hi, std::uint32_t lo) {
    // 53 significant bits; +0.5 offsets keep the value strictly inside (0,1).
    const std::uint64_t mant = (static_cast<std::uint64_t>(hi) << 21) ^ (lo >> 11);
    return (static_cast<double>(mant) + 0.5) * 0x1.0p-53;
}

std::array<double, 2> normal_pair(Key key, Counter ctr) {
    const Counter r = philox4x32(ctr, key);
    const double u1 = uniform_from_bits(r[0], r[1]);
    const double u2 = uniform_from_bits(r[2], r[3]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
}

}  // namespace droplab::rng
