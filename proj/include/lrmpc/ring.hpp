#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lrmpc {

using u64 = std::uint64_t;
using i64 = std::int64_t;
using u32 = std::uint32_t;
using u8 = std::uint8_t;

// Arithmetic over Z_{2^l}. Values live in 64-bit words; all ops wrap mod
// 2^64 and are reduced to l bits, which is the same as working mod 2^l
// because 2^l divides 2^64.
struct Ring {
    u32 l = 64;
    u64 mask = ~0ULL;

    constexpr Ring() = default;
    explicit constexpr Ring(u32 bits)
        : l(bits), mask(bits == 64 ? ~0ULL : ((1ULL << bits) - 1ULL)) {}

    constexpr u64 reduce(u64 x) const { return x & mask; }
    constexpr u64 add(u64 a, u64 b) const { return (a + b) & mask; }
    constexpr u64 sub(u64 a, u64 b) const { return (a - b) & mask; }
    constexpr u64 mul(u64 a, u64 b) const { return (a * b) & mask; }
    constexpr u64 neg(u64 a) const { return (0ULL - a) & mask; }

    // Two's complement read-out of an l-bit word.
    constexpr i64 to_signed(u64 x) const {
        x &= mask;
        if (l == 64) return static_cast<i64>(x);
        u64 sign = 1ULL << (l - 1);
        if (x & sign) return static_cast<i64>(x | ~mask);
        return static_cast<i64>(x);
    }
    constexpr u64 from_signed(i64 x) const { return static_cast<u64>(x) & mask; }

    constexpr u64 pow2(u32 e) const { return e >= l ? 0ULL : ((1ULL << e) & mask); }
};

// Fixed-point layout on the ring: l total bits, f fraction bits.
// The 3f+2 <= l bound keeps a triple product (3f pending fraction bits)
// inside the sign-safe range 2^{l-2}.
struct FixedPointConfig {
    u32 l = 64;
    u32 f = 5;

    FixedPointConfig() = default;
    FixedPointConfig(u32 l_, u32 f_) : l(l_), f(f_) {
        if (l > 64) throw std::invalid_argument("ring width above 64 bits");
        if (f < 1) throw std::invalid_argument("need at least one fraction bit");
        if (3 * f + 2 > l)
            throw std::invalid_argument("fraction bits too large: need 3f+2 <= l");
    }

    Ring ring() const { return Ring(l); }
    double ulp() const { return 1.0 / static_cast<double>(1ULL << f); }
};

} // namespace lrmpc
