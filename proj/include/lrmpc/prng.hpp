#pragma once

#include <array>
#include <cstring>

#include "lrmpc/tensor.hpp"

namespace lrmpc {

// 256-bit seed shared by a channel pair (or held by the dealer).
struct Seed256 {
    std::array<u64, 4> k{};

    bool operator==(const Seed256&) const = default;

    // Cheap domain separation for deriving sub-seeds from a master seed.
    Seed256 derive(u64 tag) const;
};

// Keyed counter-mode stream (ChaCha20 block function). Identical seed and
// domain yield the identical word stream at both endpoints, which is what
// makes zero-communication correlated masks possible.
class Prf {
public:
    Prf(const Seed256& seed, u64 domain);

    u64 next_u64();
    // next_u64 masked to the low `bits` bits
    u64 next_bits(u32 bits);

    RingTensor tensor(const Shape& shape, const Ring& rg);
    RingTensor tensor_bits(const Shape& shape, u32 bits);

private:
    void refill();

    std::array<u32, 16> state_{};
    std::array<u64, 8> buf_{};
    u64 counter_ = 0;
    std::size_t pos_ = 8;
};

// Domain tags are composed from a purpose byte plus identifying indices so
// every (seed, purpose, index) pair positions an independent stream.
namespace domain {
constexpr u64 make(u8 purpose, u32 index, u8 sub = 0) {
    return (static_cast<u64>(purpose) << 48) | (static_cast<u64>(index) << 8) | sub;
}
constexpr u8 kShare = 1;       // additive input sharing
constexpr u8 kWireLambda = 2;  // trio per-wire masks
constexpr u8 kBeaver = 3;      // dealer triple randomness
constexpr u8 kTruncMask = 4;   // dealer truncation masks
constexpr u8 kSubSeed = 5;     // master -> component seeds
constexpr u8 kWeight = 6;      // weight sharing
} // namespace domain

// Pairwise seeds for the trio topology plus the dealer's own seed.
struct SeedSet {
    Seed256 p12, p13, p23, dealer;

    static SeedSet from_master(const Seed256& master);
};

// Master seed resolution: explicit value wins, else LRMPC_SEED, else a fixed default.
constexpr u64 kDefaultSeed = 0x5eedba5e;
Seed256 make_master_seed(u64 value);
Seed256 resolve_master_seed(bool has_flag, u64 flag_value);

} // namespace lrmpc
