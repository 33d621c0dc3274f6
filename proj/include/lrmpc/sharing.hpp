#pragma once

#include "lrmpc/prng.hpp"
#include "lrmpc/tensor.hpp"

namespace lrmpc {

enum class Scheme { Additive, Trio };

// 1-based party index. Trio fixes n=3 with roles P1/P2/P3.
struct PartyId {
    u32 index = 1;

    bool operator==(const PartyId&) const = default;
};

struct AdditiveShare {
    PartyId owner;
    RingTensor value;
};

// Trio masked sharing of X:
//   P1 holds (lam2, lam3); P2 holds (m3, lam2); P3 holds (m2, lam3)
// with m2 = X + lam2 and m3 = X + lam3 over the ring. Any two roles
// jointly hold an (m, lam) pair and can reconstruct.
struct TrioShare {
    PartyId owner;        // role 1, 2 or 3
    RingTensor a, b;      // P1: (lam2, lam3); P2: (m3, lam2); P3: (m2, lam3)
};

std::vector<AdditiveShare> share_additive(const RingTensor& x, u32 n, const Ring& rg,
                                          const Seed256& seed, u32 stream_index = 0);
RingTensor reconstruct_additive(const std::vector<AdditiveShare>& shares, const Ring& rg);

std::array<TrioShare, 3> share_trio(const RingTensor& x, const Ring& rg, const SeedSet& seeds,
                                    u32 stream_index = 0);
RingTensor reconstruct_trio(const TrioShare& a, const TrioShare& b, const Ring& rg);

// share of sum_k coeff_k * x_k + constant (public constant added by party 1
// for additive sharing; added to both m components under trio).
AdditiveShare linear_combine(const std::vector<AdditiveShare>& shares,
                             const std::vector<u64>& coeffs, const RingTensor* constant,
                             const Ring& rg);
TrioShare linear_combine(const std::vector<TrioShare>& shares, const std::vector<u64>& coeffs,
                         const RingTensor* constant, const Ring& rg);

} // namespace lrmpc
