#include "lrmpc/sharing.hpp"

#include <stdexcept>

namespace lrmpc {

std::vector<AdditiveShare> share_additive(const RingTensor& x, u32 n, const Ring& rg,
                                          const Seed256& seed, u32 stream_index) {
    if (n < 2) throw std::invalid_argument("additive sharing needs at least 2 parties");
    std::vector<AdditiveShare> shares;
    shares.reserve(n);
    RingTensor rest = x;
    for (u32 i = 1; i < n; ++i) {
        Prf prf(seed, domain::make(domain::kShare, stream_index, static_cast<u8>(i)));
        RingTensor si = prf.tensor(x.shape, rg);
        rest = ring_sub(rg, rest, si);
        shares.push_back({PartyId{i}, std::move(si)});
    }
    shares.push_back({PartyId{n}, std::move(rest)});
    return shares;
}

RingTensor reconstruct_additive(const std::vector<AdditiveShare>& shares, const Ring& rg) {
    if (shares.empty()) throw std::invalid_argument("no shares to reconstruct");
    RingTensor acc = shares[0].value;
    for (std::size_t i = 1; i < shares.size(); ++i) {
        if (!shares[i].value.same_shape(acc))
            throw std::invalid_argument("reconstruct_additive: share shape mismatch");
        acc = ring_add(rg, acc, shares[i].value);
    }
    return acc;
}

std::array<TrioShare, 3> share_trio(const RingTensor& x, const Ring& rg, const SeedSet& seeds,
                                    u32 stream_index) {
    Prf prf2(seeds.p12, domain::make(domain::kShare, stream_index, 2));
    Prf prf3(seeds.p13, domain::make(domain::kShare, stream_index, 3));
    RingTensor lam2 = prf2.tensor(x.shape, rg);
    RingTensor lam3 = prf3.tensor(x.shape, rg);
    RingTensor m2 = ring_add(rg, x, lam2);
    RingTensor m3 = ring_add(rg, x, lam3);
    return {TrioShare{PartyId{1}, lam2, lam3}, TrioShare{PartyId{2}, m3, lam2},
            TrioShare{PartyId{3}, m2, lam3}};
}

RingTensor reconstruct_trio(const TrioShare& a, const TrioShare& b, const Ring& rg) {
    if (a.owner == b.owner) throw std::invalid_argument("reconstruct_trio: need two distinct roles");
    const TrioShare* p[4] = {nullptr, nullptr, nullptr, nullptr};
    p[a.owner.index] = &a;
    p[b.owner.index] = &b;
    if (p[1] && p[2]) return ring_sub(rg, p[2]->a, p[1]->b);  // m3 - lam3
    if (p[1] && p[3]) return ring_sub(rg, p[3]->a, p[1]->a);  // m2 - lam2
    if (p[2] && p[3]) return ring_sub(rg, p[2]->a, p[3]->b);  // m3 - lam3
    throw std::invalid_argument("reconstruct_trio: invalid roles");
}

AdditiveShare linear_combine(const std::vector<AdditiveShare>& shares,
                             const std::vector<u64>& coeffs, const RingTensor* constant,
                             const Ring& rg) {
    if (shares.empty() || shares.size() != coeffs.size())
        throw std::invalid_argument("linear_combine: term count mismatch");
    PartyId owner = shares[0].owner;
    RingTensor acc = ring_scale(rg, coeffs[0], shares[0].value);
    for (std::size_t i = 1; i < shares.size(); ++i) {
        if (!(shares[i].owner == owner))
            throw std::invalid_argument("linear_combine: shares from different owners");
        acc = ring_add(rg, acc, ring_scale(rg, coeffs[i], shares[i].value));
    }
    if (constant && owner.index == 1) acc = ring_add(rg, acc, *constant);
    return {owner, std::move(acc)};
}

TrioShare linear_combine(const std::vector<TrioShare>& shares, const std::vector<u64>& coeffs,
                         const RingTensor* constant, const Ring& rg) {
    if (shares.empty() || shares.size() != coeffs.size())
        throw std::invalid_argument("linear_combine: term count mismatch");
    PartyId owner = shares[0].owner;
    RingTensor a = ring_scale(rg, coeffs[0], shares[0].a);
    RingTensor b = ring_scale(rg, coeffs[0], shares[0].b);
    for (std::size_t i = 1; i < shares.size(); ++i) {
        if (!(shares[i].owner == owner))
            throw std::invalid_argument("linear_combine: shares from different owners");
        a = ring_add(rg, a, ring_scale(rg, coeffs[i], shares[i].a));
        b = ring_add(rg, b, ring_scale(rg, coeffs[i], shares[i].b));
    }
    if (constant) {
        // m components absorb the public constant, lambdas stay untouched:
        // P2.a = m3, P3.a = m2; P1 holds only lambdas.
        if (owner.index == 2 || owner.index == 3) a = ring_add(rg, a, *constant);
    }
    return {owner, std::move(a), std::move(b)};
}

} // namespace lrmpc
