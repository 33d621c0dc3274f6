#include "lrmpc/offline.hpp"

#include <stdexcept>

namespace lrmpc {

namespace {

// Additive split of `x` where parties 1..n-1 draw from their own dealer
// sub-seed and party n holds the correction. Only the correction costs
// dealer bytes.
std::vector<RingTensor> split_seeded(const RingTensor& x, u32 n, const Ring& rg,
                                     const Seed256& seed, u64 dom) {
    std::vector<RingTensor> out;
    out.reserve(n);
    RingTensor rest = x;
    for (u32 i = 1; i < n; ++i) {
        Prf prf(seed.derive(0x100 + i), dom);
        RingTensor si = prf.tensor(x.shape, rg);
        rest = ring_sub(rg, rest, si);
        out.push_back(std::move(si));
    }
    out.push_back(std::move(rest));
    return out;
}

} // namespace

BeaverTriple gen_beaver(std::size_t m, std::size_t n, std::size_t o, u32 parties, const Ring& rg,
                        const Seed256& seed, u32 slot) {
    if (m < 1 || n < 1 || o < 1) throw std::invalid_argument("gen_beaver: dims must be positive");
    Prf prf(seed, domain::make(domain::kBeaver, slot, 0));
    RingTensor A = prf.tensor({m, n}, rg);
    RingTensor B = prf.tensor({n, o}, rg);
    RingTensor C = ring_matmul(rg, A, B);
    auto As = split_seeded(A, parties, rg, seed, domain::make(domain::kBeaver, slot, 1));
    auto Bs = split_seeded(B, parties, rg, seed, domain::make(domain::kBeaver, slot, 2));
    auto Cs = split_seeded(C, parties, rg, seed, domain::make(domain::kBeaver, slot, 3));
    BeaverTriple t;
    for (u32 i = 0; i < parties; ++i)
        t.party.push_back({std::move(As[i]), std::move(Bs[i]), std::move(Cs[i]), false, false});
    return t;
}

BeaverTriple gen_beaver_elt(const Shape& shape, u32 parties, const Ring& rg, const Seed256& seed,
                            u32 slot) {
    Prf prf(seed, domain::make(domain::kBeaver, slot, 4));
    RingTensor A = prf.tensor(shape, rg);
    RingTensor B = prf.tensor(shape, rg);
    RingTensor C = ring_elt_mul(rg, A, B);
    auto As = split_seeded(A, parties, rg, seed, domain::make(domain::kBeaver, slot, 5));
    auto Bs = split_seeded(B, parties, rg, seed, domain::make(domain::kBeaver, slot, 6));
    auto Cs = split_seeded(C, parties, rg, seed, domain::make(domain::kBeaver, slot, 7));
    BeaverTriple t;
    for (u32 i = 0; i < parties; ++i)
        t.party.push_back({std::move(As[i]), std::move(Bs[i]), std::move(Cs[i]), true, false});
    return t;
}

TruncMask gen_trunc_mask(const Shape& shape, u32 d, const FixedPointConfig& cfg, u32 parties,
                         Scheme scheme, const Seed256& seed, u32 slot) {
    if (d != cfg.f && d != 2 * cfg.f)
        throw std::invalid_argument("gen_trunc_mask: d must be f or 2f");
    if (d + 2 >= cfg.l) throw std::invalid_argument("gen_trunc_mask: d out of range");
    Ring rg = cfg.ring();
    Prf prf(seed, domain::make(domain::kTruncMask, slot, 0));
    RingTensor R = prf.tensor_bits(shape, cfg.l - 1 - d);
    RingTensor Rp = prf.tensor_bits(shape, d);
    RingTensor Bbit = prf.tensor_bits(shape, 1);

    TruncMask out;
    out.scheme = scheme;
    if (scheme == Scheme::Additive) {
        auto Rs = split_seeded(R, parties, rg, seed, domain::make(domain::kTruncMask, slot, 1));
        auto Rps = split_seeded(Rp, parties, rg, seed, domain::make(domain::kTruncMask, slot, 2));
        auto Bs = split_seeded(Bbit, parties, rg, seed, domain::make(domain::kTruncMask, slot, 3));
        for (u32 i = 0; i < parties; ++i) {
            TruncMaskShare s;
            s.d = d;
            s.R = std::move(Rs[i]);
            s.Rp = std::move(Rps[i]);
            s.Bbit = std::move(Bs[i]);
            out.party.push_back(std::move(s));
        }
        return out;
    }

    // Trio: the opening runs additively between P2 and P3; the result is
    // re-shared onto fresh lam_out masks that P1 can derive offline.
    auto Rs = split_seeded(R, 2, rg, seed, domain::make(domain::kTruncMask, slot, 1));
    auto Rps = split_seeded(Rp, 2, rg, seed, domain::make(domain::kTruncMask, slot, 2));
    auto Bs = split_seeded(Bbit, 2, rg, seed, domain::make(domain::kTruncMask, slot, 3));
    RingTensor lam2 = prf_trunc_out_lambda(seed, slot, 2, shape, rg);
    RingTensor lam3 = prf_trunc_out_lambda(seed, slot, 3, shape, rg);

    out.party.resize(3);
    for (auto& s : out.party) s.d = d;
    out.party[0].lam_out2 = lam2;  // P1 holds both output masks
    out.party[0].lam_out3 = lam3;
    out.party[1].R = std::move(Rs[0]);
    out.party[1].Rp = std::move(Rps[0]);
    out.party[1].Bbit = std::move(Bs[0]);
    out.party[1].lam_out2 = lam2;  // P2 knows the 2-side
    out.party[2].R = std::move(Rs[1]);
    out.party[2].Rp = std::move(Rps[1]);
    out.party[2].Bbit = std::move(Bs[1]);
    out.party[2].lam_out3 = lam3;  // P3 knows the 3-side
    return out;
}

TrioPrep gen_trio_prep(const RingTensor& lamX2, const RingTensor& lamX3, const RingTensor& lamY2,
                       const RingTensor& lamY3, const RingTensor& lamZ2, const RingTensor& lamZ3,
                       bool elementwise, const Ring& rg) {
    auto prod = [&](const RingTensor& a, const RingTensor& b) {
        return elementwise ? ring_elt_mul(rg, a, b) : ring_matmul(rg, a, b);
    };
    RingTensor dX = ring_sub(rg, lamX3, lamX2);
    RingTensor dY = ring_sub(rg, lamY3, lamY2);
    // M = -dX.lamY3 - lamX3.dY + lamX3.lamY3 + lamZ3   (P1 -> P3)
    RingTensor M = ring_add(
        rg,
        ring_sub(rg, prod(lamX3, lamY3), ring_add(rg, prod(dX, lamY3), prod(lamX3, dY))),
        lamZ3);
    // N = dX.lamY2 + lamX2.dY + lamX2.lamY2 + lamZ2    (P1 -> P2)
    RingTensor N = ring_add(
        rg, ring_add(rg, ring_add(rg, prod(dX, lamY2), prod(lamX2, dY)), prod(lamX2, lamY2)),
        lamZ2);

    TrioPrep out;
    out.party[0] = {RingTensor{}, lamZ2, lamZ3, elementwise, false};
    out.party[1] = {std::move(N), lamZ2, std::nullopt, elementwise, false};
    out.party[2] = {std::move(M), std::nullopt, lamZ3, elementwise, false};
    return out;
}

OfflineCostReport account(const std::vector<MaterialSpec>& slots, u32 l) {
    OfflineCostReport rep;
    std::map<u32, OfflineCostReport::Row> rows;
    for (const auto& s : slots) {
        auto& row = rows[s.layer];
        row.layer = s.layer;
        switch (s.kind) {
        case MaterialKind::BeaverMatmul:
            row.triple_elements += static_cast<u64>(s.m) * s.n + static_cast<u64>(s.n) * s.o +
                                   static_cast<u64>(s.m) * s.o;
            break;
        case MaterialKind::BeaverElt:
            row.triple_elements += 3 * static_cast<u64>(shape_elems(s.shape));
            break;
        case MaterialKind::TruncMask: {
            u64 e = shape_elems(s.shape);
            row.trunc_mask_elements += e;
            row.trunc_shared_bits += e * l;  // (l-1-d) + d + 1, independent of d
            break;
        }
        case MaterialKind::TrioMatmul:
            row.trio_prep_elements += 2 * static_cast<u64>(s.m) * s.o;
            break;
        case MaterialKind::TrioElt:
            row.trio_prep_elements += 2 * static_cast<u64>(shape_elems(s.shape));
            break;
        case MaterialKind::None:
            break;
        }
    }
    for (auto& [k, v] : rows) {
        rep.per_layer.push_back(v);
        rep.total.triple_elements += v.triple_elements;
        rep.total.trio_prep_elements += v.trio_prep_elements;
        rep.total.trunc_mask_elements += v.trunc_mask_elements;
        rep.total.trunc_shared_bits += v.trunc_shared_bits;
    }
    return rep;
}

BeaverTripleShare& MaterialStore::triple(u32 slot) {
    auto& s = slots_.at(slot);
    if (!s.triple) throw std::runtime_error("slot " + std::to_string(slot) + " has no triple");
    return *s.triple;
}

TruncMaskShare& MaterialStore::mask(u32 slot) {
    auto& s = slots_.at(slot);
    if (!s.mask) throw std::runtime_error("slot " + std::to_string(slot) + " has no trunc mask");
    return *s.mask;
}

TrioPrepShare& MaterialStore::prep(u32 slot) {
    auto& s = slots_.at(slot);
    if (!s.prep) throw std::runtime_error("slot " + std::to_string(slot) + " has no trio prep");
    return *s.prep;
}

RingTensor prf_wire_lambda(const SeedSet& seeds, u32 wire, int side, const Shape& shape,
                           const Ring& rg) {
    const Seed256& seed = side == 2 ? seeds.p12 : seeds.p13;
    Prf prf(seed, domain::make(domain::kWireLambda, wire, static_cast<u8>(side)));
    return prf.tensor(shape, rg);
}

RingTensor prf_trunc_out_lambda(const Seed256& dealer_seed, u32 slot, int side, const Shape& shape,
                                const Ring& rg) {
    Prf prf(dealer_seed, domain::make(domain::kTruncMask, slot, side == 2 ? 4 : 5));
    return prf.tensor(shape, rg);
}

std::array<TrioShare, 3> share_trio_wire(const RingTensor& x, u32 wire, const SeedSet& seeds,
                                         const Ring& rg) {
    RingTensor lam2 = prf_wire_lambda(seeds, wire, 2, x.shape, rg);
    RingTensor lam3 = prf_wire_lambda(seeds, wire, 3, x.shape, rg);
    RingTensor m2 = ring_add(rg, x, lam2);
    RingTensor m3 = ring_add(rg, x, lam3);
    return {TrioShare{PartyId{1}, lam2, lam3}, TrioShare{PartyId{2}, m3, lam2},
            TrioShare{PartyId{3}, m2, lam3}};
}

const RingTensor& LambdaResolver::lambda(u32 wire, int side) {
    auto key = std::make_pair(wire, side);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    auto rit = rules_->find(wire);
    if (rit == rules_->end())
        throw std::runtime_error("no lambda rule for wire " + std::to_string(wire));
    const WireLambdaRule& rule = rit->second;
    RingTensor out;
    switch (rule.kind) {
    case WireLambdaRule::Kind::Prf:
        out = prf_wire_lambda(*seeds_, wire, side, rule.shape, rg_);
        break;
    case WireLambdaRule::Kind::Zero:
        out = RingTensor::zeros(rule.shape);
        break;
    case WireLambdaRule::Kind::Im2col:
        out = im2col(lambda(rule.src_wire, side), rule.conv);
        break;
    case WireLambdaRule::Kind::PublicMatmulLeft:
        out = ring_matmul(rg_, rule.pub, lambda(rule.src_wire, side));
        break;
    case WireLambdaRule::Kind::TruncMaskOut:
        out = prf_trunc_out_lambda(seeds_->dealer, rule.src_slot, side, rule.shape, rg_);
        break;
    }
    return memo_.emplace(key, std::move(out)).first->second;
}

DealerOutput deal_material(const std::vector<MaterialSpec>& slots, Scheme scheme, u32 parties,
                           const FixedPointConfig& cfg, const SeedSet& seeds,
                           const std::map<u32, WireLambdaRule>& wire_rules) {
    Ring rg = cfg.ring();
    DealerOutput out;
    u32 nstores = scheme == Scheme::Trio ? 3 : parties;
    std::vector<std::vector<PartyMaterial>> mats(nstores);
    for (auto& m : mats) m.resize(slots.size());
    LambdaResolver lams(&wire_rules, &seeds, rg);

    auto meter = [&](u32 from, u32 to, u64 elems) {
        out.bytes[std::to_string(from) + "->" + std::to_string(to)] += elems * 8;
    };

    for (u32 idx = 0; idx < slots.size(); ++idx) {
        const auto& spec = slots[idx];
        switch (spec.kind) {
        case MaterialKind::BeaverMatmul:
        case MaterialKind::BeaverElt: {
            BeaverTriple t = spec.kind == MaterialKind::BeaverMatmul
                                 ? gen_beaver(spec.m, spec.n, spec.o, parties, rg, seeds.dealer, idx)
                                 : gen_beaver_elt(spec.shape, parties, rg, seeds.dealer, idx);
            // correction shares (party n) are the only shipped payload
            meter(0, parties, t.party.back().A.size() + t.party.back().B.size() +
                                  t.party.back().C.size());
            for (u32 p = 0; p < parties; ++p) mats[p][idx].triple = std::move(t.party[p]);
            break;
        }
        case MaterialKind::TruncMask: {
            TruncMask mk = gen_trunc_mask(spec.shape, spec.d, cfg, parties, scheme, seeds.dealer, idx);
            if (scheme == Scheme::Additive) {
                meter(0, parties, 3 * shape_elems(spec.shape));
                for (u32 p = 0; p < parties; ++p) mats[p][idx].mask = std::move(mk.party[p]);
            } else {
                // additive core between P2/P3: correction goes to P3
                meter(0, 3, 3 * shape_elems(spec.shape));
                for (u32 p = 0; p < 3; ++p) mats[p][idx].mask = std::move(mk.party[p]);
            }
            break;
        }
        case MaterialKind::TrioMatmul:
        case MaterialKind::TrioElt: {
            bool elt = spec.kind == MaterialKind::TrioElt;
            TrioPrep prep = gen_trio_prep(lams.lambda(spec.x_wire, 2), lams.lambda(spec.x_wire, 3),
                                          lams.lambda(spec.y_wire, 2), lams.lambda(spec.y_wire, 3),
                                          lams.lambda(spec.z_wire, 2), lams.lambda(spec.z_wire, 3),
                                          elt, rg);
            // P1 ships N to P2 and M to P3
            meter(1, 2, prep.party[1].MN.size());
            meter(1, 3, prep.party[2].MN.size());
            for (u32 p = 0; p < 3; ++p) mats[p][idx].prep = std::move(prep.party[p]);
            break;
        }
        case MaterialKind::None:
            break;
        }
    }
    for (auto& m : mats) out.stores.emplace_back(std::move(m));
    return out;
}

} // namespace lrmpc
