#include <doctest.h>

#include <cmath>

#include "lrmpc/offline.hpp"

using namespace lrmpc;

namespace {
SeedSet test_seeds(u64 v = 99) { return SeedSet::from_master(make_master_seed(v)); }

RingTensor reconstruct(const Ring& rg, const std::vector<BeaverTripleShare>& party,
                       RingTensor BeaverTripleShare::*field) {
    RingTensor acc = party[0].*field;
    for (std::size_t i = 1; i < party.size(); ++i) acc = ring_add(rg, acc, party[i].*field);
    return acc;
}
} // namespace

TEST_CASE("beaver triples satisfy C = A.B") {
    Ring rg(64);
    auto seeds = test_seeds();
    for (u32 slot = 0; slot < 100; ++slot) {
        BeaverTriple t = gen_beaver(2, 3, 2, 3, rg, seeds.dealer, slot);
        RingTensor A = reconstruct(rg, t.party, &BeaverTripleShare::A);
        RingTensor B = reconstruct(rg, t.party, &BeaverTripleShare::B);
        RingTensor C = reconstruct(rg, t.party, &BeaverTripleShare::C);
        CHECK(C.data == ring_matmul(rg, A, B).data);
    }
    // elementwise flavor
    BeaverTriple t = gen_beaver_elt({4}, 2, rg, seeds.dealer, 1000);
    RingTensor A = reconstruct(rg, t.party, &BeaverTripleShare::A);
    RingTensor B = reconstruct(rg, t.party, &BeaverTripleShare::B);
    RingTensor C = reconstruct(rg, t.party, &BeaverTripleShare::C);
    CHECK(C.data == ring_elt_mul(rg, A, B).data);
    CHECK(t.party[0].elementwise);
}

TEST_CASE("beaver generation is deterministic under the seed") {
    Ring rg(64);
    auto seeds = test_seeds();
    BeaverTriple a = gen_beaver(2, 2, 2, 2, rg, seeds.dealer, 7);
    BeaverTriple b = gen_beaver(2, 2, 2, 2, rg, seeds.dealer, 7);
    CHECK(a.party[0].A.data == b.party[0].A.data);
    CHECK(a.party[1].C.data == b.party[1].C.data);
    BeaverTriple c = gen_beaver(2, 2, 2, 2, rg, seeds.dealer, 8);
    CHECK(a.party[0].A.data != c.party[0].A.data);
}

TEST_CASE("trunc masks reconstruct into the stated bit ranges") {
    FixedPointConfig cfg(64, 5);
    Ring rg = cfg.ring();
    auto seeds = test_seeds();
    for (u32 d : {5u, 10u}) {
        u64 rmax = 1ULL << (64 - 1 - d);
        u64 rpmax = 1ULL << d;
        // 10^4 elements across a few masks
        for (u32 slot = 0; slot < 10; ++slot) {
            TruncMask mk = gen_trunc_mask({100, 10}, d, cfg, 3, Scheme::Additive, seeds.dealer, slot + d);
            RingTensor R = mk.party[0].R, Rp = mk.party[0].Rp, Bb = mk.party[0].Bbit;
            for (u32 p = 1; p < 3; ++p) {
                R = ring_add(rg, R, mk.party[p].R);
                Rp = ring_add(rg, Rp, mk.party[p].Rp);
                Bb = ring_add(rg, Bb, mk.party[p].Bbit);
            }
            for (u64 v : R.data) CHECK(v < rmax);
            for (u64 v : Rp.data) CHECK(v < rpmax);
            for (u64 v : Bb.data) CHECK(v <= 1);
        }
    }
    CHECK_THROWS(gen_trunc_mask({1}, 7, cfg, 2, Scheme::Additive, seeds.dealer, 0));
}

TEST_CASE("trio trunc masks carry fresh output lambdas per role") {
    FixedPointConfig cfg(64, 5);
    auto seeds = test_seeds();
    TruncMask mk = gen_trunc_mask({2, 2}, 5, cfg, 3, Scheme::Trio, seeds.dealer, 3);
    REQUIRE(mk.party.size() == 3);
    CHECK(mk.party[0].lam_out2.has_value());
    CHECK(mk.party[0].lam_out3.has_value());
    CHECK(mk.party[1].lam_out2.has_value());
    CHECK_FALSE(mk.party[1].lam_out3.has_value());
    CHECK(mk.party[2].lam_out3.has_value());
    CHECK_FALSE(mk.party[2].lam_out2.has_value());
    CHECK(mk.party[0].lam_out2->data == mk.party[1].lam_out2->data);
    CHECK(mk.party[0].lam_out3->data == mk.party[2].lam_out3->data);
    // the additive core reconstructs in range
    Ring rg = cfg.ring();
    RingTensor R = ring_add(rg, mk.party[1].R, mk.party[2].R);
    for (u64 v : R.data) CHECK(v < (1ULL << 58));
}

TEST_CASE("trio prep satisfies the multiplication identity") {
    Ring rg(64);
    auto seeds = test_seeds();
    Prf prf(seeds.dealer, 500);

    for (int t = 0; t < 100; ++t) {
        std::size_t m = 2, n = 3, o = 2;
        RingTensor lamX2 = prf.tensor({m, n}, rg), lamX3 = prf.tensor({m, n}, rg);
        RingTensor lamY2 = prf.tensor({n, o}, rg), lamY3 = prf.tensor({n, o}, rg);
        RingTensor lamZ2 = prf.tensor({m, o}, rg), lamZ3 = prf.tensor({m, o}, rg);
        TrioPrep prep = gen_trio_prep(lamX2, lamX3, lamY2, lamY3, lamZ2, lamZ3, false, rg);

        RingTensor X = prf.tensor({m, n}, rg);
        RingTensor Y = prf.tensor({n, o}, rg);
        RingTensor mX2 = ring_add(rg, X, lamX2), mX3 = ring_add(rg, X, lamX3);
        RingTensor mY2 = ring_add(rg, Y, lamY2), mY3 = ring_add(rg, Y, lamY3);

        // online messages per the reconstruction
        RingTensor W = ring_add(
            rg,
            ring_neg(rg, ring_add(rg, ring_matmul(rg, mX2, lamY3), ring_matmul(rg, lamX3, mY2))),
            prep.party[2].MN);
        RingTensor V = ring_add(
            rg,
            ring_neg(rg, ring_add(rg, ring_matmul(rg, mX3, lamY2), ring_matmul(rg, lamX2, mY3))),
            prep.party[1].MN);
        RingTensor mZ3 = ring_add(rg, ring_matmul(rg, mX3, mY3), W);
        RingTensor mZ2 = ring_add(rg, ring_matmul(rg, mX2, mY2), V);

        RingTensor Z = ring_matmul(rg, X, Y);
        CHECK(ring_sub(rg, mZ3, lamZ3).data == Z.data);
        CHECK(ring_sub(rg, mZ2, lamZ2).data == Z.data);
    }

    // all-lambda-zero hook: the algebra collapses to M = lamZ3, N = lamZ2
    RingTensor z22({2, 2}), z23({2, 3}), z32({3, 2});
    RingTensor lamZ2 = prf.tensor({2, 2}, rg), lamZ3 = prf.tensor({2, 2}, rg);
    TrioPrep prep = gen_trio_prep(z23, z23, z32, z32, lamZ2, lamZ3, false, rg);
    CHECK(prep.party[2].MN.data == lamZ3.data);
    CHECK(prep.party[1].MN.data == lamZ2.data);
}

TEST_CASE("account: closed-form triple counts and the low-rank reduction") {
    // FC m=1, n=o=512 full rank
    std::vector<MaterialSpec> full;
    MaterialSpec ms;
    ms.kind = MaterialKind::BeaverMatmul;
    ms.layer = 0;
    ms.m = 1;
    ms.n = 512;
    ms.o = 512;
    full.push_back(ms);
    OfflineCostReport rep = account(full, 64);
    CHECK(rep.total.triple_elements == 512 + 262144 + 512);
    CHECK(rep.total.triple_elements == 263168);

    // same layer decomposed at rank 128: two triples
    std::vector<MaterialSpec> low;
    MaterialSpec a = ms;
    a.n = 512;
    a.o = 128;
    low.push_back(a);
    MaterialSpec b = ms;
    b.n = 128;
    b.o = 512;
    low.push_back(b);
    OfflineCostReport rlow = account(low, 64);
    CHECK(rlow.total.triple_elements == 66176 + 66176);
    CHECK(rlow.total.triple_elements == 132352);
    double reduction = 1.0 - static_cast<double>(rlow.total.triple_elements) /
                                 static_cast<double>(rep.total.triple_elements);
    CHECK(reduction == doctest::Approx(0.497).epsilon(0.001));

    // zero-layer plan
    OfflineCostReport zero = account({}, 64);
    CHECK(zero.total.triple_elements == 0);
    CHECK(zero.per_layer.empty());

    // square FC at m=1: the reduction factor approaches 2*rho
    for (std::size_t n : {128u, 256u, 512u}) {
        double rho = 0.25;
        auto r = static_cast<std::size_t>(rho * n);
        std::vector<MaterialSpec> f(1), l(2);
        f[0].kind = MaterialKind::BeaverMatmul;
        f[0].m = 1;
        f[0].n = n;
        f[0].o = n;
        l[0] = f[0];
        l[0].o = r;
        l[1] = f[0];
        l[1].n = r;
        double factor = static_cast<double>(account(l, 64).total.triple_elements) /
                        static_cast<double>(account(f, 64).total.triple_elements);
        CHECK(std::fabs(factor - 2 * rho) <= 4.0 / static_cast<double>(n));
    }
}

TEST_CASE("trunc mask accounting is invariant in d") {
    std::vector<MaterialSpec> a, b;
    MaterialSpec ms;
    ms.kind = MaterialKind::TruncMask;
    ms.shape = {7, 9};
    ms.d = 5;
    a.push_back(ms);
    ms.d = 10;
    b.push_back(ms);
    OfflineCostReport ra = account(a, 64), rb = account(b, 64);
    CHECK(ra.total.trunc_mask_elements == rb.total.trunc_mask_elements);
    CHECK(ra.total.trunc_shared_bits == rb.total.trunc_shared_bits);
    CHECK(ra.total.trunc_shared_bits == 63ULL * 64);  // (l-1-d)+d+1 = l per element
}

TEST_CASE("dealer outputs are input independent and deterministic") {
    FixedPointConfig cfg(64, 5);
    auto seeds = test_seeds();
    std::vector<MaterialSpec> slots;
    MaterialSpec mm;
    mm.kind = MaterialKind::BeaverMatmul;
    mm.m = 2;
    mm.n = 2;
    mm.o = 2;
    slots.push_back(mm);
    MaterialSpec tk;
    tk.kind = MaterialKind::TruncMask;
    tk.shape = {2, 2};
    tk.d = 5;
    slots.push_back(tk);

    DealerOutput d1 = deal_material(slots, Scheme::Additive, 3, cfg, seeds, {});
    DealerOutput d2 = deal_material(slots, Scheme::Additive, 3, cfg, seeds, {});
    CHECK(d1.stores[0].triple(0).A.data == d2.stores[0].triple(0).A.data);
    CHECK(d1.stores[2].mask(1).R.data == d2.stores[2].mask(1).R.data);
    CHECK(d1.bytes == d2.bytes);
    CHECK(d1.bytes.count("0->3") == 1);
}
