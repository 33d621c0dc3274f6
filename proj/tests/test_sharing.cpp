#include <doctest.h>

#include <cmath>

#include "lrmpc/offline.hpp"
#include "lrmpc/sharing.hpp"

using namespace lrmpc;

namespace {
SeedSet test_seeds(u64 v = 42) { return SeedSet::from_master(make_master_seed(v)); }

// Wilson-Hilferty approximation of the chi-square quantile
double chi2_quantile(double df, double z) {
    double a = 2.0 / (9.0 * df);
    double t = 1.0 - a + z * std::sqrt(a);
    return df * t * t * t;
}
} // namespace

TEST_CASE("additive sharing reconstructs") {
    Ring rg(64);
    auto seeds = test_seeds();
    Prf prf(seeds.dealer, 7);

    RingTensor zero({2, 2});
    auto sh0 = share_additive(zero, 3, rg, seeds.dealer, 0);
    for (u64 v : reconstruct_additive(sh0, rg).data) CHECK(v == 0);

    for (u32 n : {2u, 3u, 5u}) {
        for (int t = 0; t < 50; ++t) {
            RingTensor x = prf.tensor({3, 2}, rg);
            auto sh = share_additive(x, n, rg, seeds.dealer, static_cast<u32>(t));
            CHECK(reconstruct_additive(sh, rg).data == x.data);
        }
    }
    CHECK_THROWS(share_additive(zero, 1, rg, seeds.dealer, 0));
}

TEST_CASE("additive sharing exhaustive at l=8 scalars") {
    Ring rg(8);
    auto seeds = test_seeds();
    for (u32 x = 0; x < 256; ++x) {
        auto sh = share_additive(RingTensor({1}, {x}), 3, rg, seeds.dealer, x);
        CHECK(reconstruct_additive(sh, rg).data[0] == x);
    }
}

TEST_CASE("additive sharing deterministic under a fixed seed") {
    Ring rg(64);
    auto seeds = test_seeds();
    RingTensor x({4}, {1, 2, 3, 4});
    auto a = share_additive(x, 3, rg, seeds.dealer, 5);
    auto b = share_additive(x, 3, rg, seeds.dealer, 5);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].value.data == b[i].value.data);
    auto c = share_additive(x, 3, rg, seeds.dealer, 6);
    CHECK(a[0].value.data != c[0].value.data);
}

TEST_CASE("single-share marginals pass a chi-square uniformity test at l=8") {
    Ring rg(8);
    auto seeds = test_seeds(1234);
    RingTensor secret({1}, {177});
    const int trials = 100000;
    std::vector<u32> first(256, 0), last(256, 0);
    for (int t = 0; t < trials; ++t) {
        auto sh = share_additive(secret, 3, rg, seeds.dealer, static_cast<u32>(t));
        ++first[sh[0].value.data[0]];
        ++last[sh[2].value.data[0]];
    }
    double expect = trials / 256.0;
    double crit = chi2_quantile(255.0, 3.0902);  // significance 0.001
    for (auto* hist : {&first, &last}) {
        double stat = 0;
        for (u32 c : *hist) stat += (c - expect) * (c - expect) / expect;
        CHECK(stat < crit);
    }
}

TEST_CASE("trio sharing: definition and any-two reconstruction") {
    Ring rg(64);
    auto seeds = test_seeds();
    Prf prf(seeds.dealer, 8);

    RingTensor zero({2});
    auto z = share_trio(zero, rg, seeds, 0);
    // x = 0 -> m2 = lam2, m3 = lam3
    CHECK(z[2].a.data == z[0].a.data);  // P3 holds m2; P1 holds lam2
    CHECK(z[1].a.data == z[0].b.data);  // P2 holds m3; P1 holds lam3

    for (int t = 1; t <= 50; ++t) {
        RingTensor x = prf.tensor({2, 3}, rg);
        auto sh = share_trio(x, rg, seeds, static_cast<u32>(t));
        CHECK(reconstruct_trio(sh[0], sh[1], rg).data == x.data);
        CHECK(reconstruct_trio(sh[0], sh[2], rg).data == x.data);
        CHECK(reconstruct_trio(sh[1], sh[2], rg).data == x.data);
        CHECK(reconstruct_trio(sh[2], sh[1], rg).data == x.data);
    }
    auto sh = share_trio(zero, rg, seeds, 99);
    CHECK_THROWS(reconstruct_trio(sh[1], sh[1], rg));
}

TEST_CASE("trio single share is uniform at l=8") {
    Ring rg(8);
    auto seeds = test_seeds(777);
    RingTensor secret({1}, {91});
    const int trials = 100000;
    std::vector<u32> m3hist(256, 0);
    for (int t = 0; t < trials; ++t) {
        auto sh = share_trio(secret, rg, seeds, static_cast<u32>(t));
        ++m3hist[sh[1].a.data[0]];
    }
    double expect = trials / 256.0;
    double stat = 0;
    for (u32 c : m3hist) stat += (c - expect) * (c - expect) / expect;
    CHECK(stat < chi2_quantile(255.0, 3.0902));
}

TEST_CASE("linear combinations reconstruct the plaintext combination") {
    Ring rg(64);
    auto seeds = test_seeds();
    Prf prf(seeds.dealer, 9);
    RingTensor x = prf.tensor({2, 2}, rg);
    RingTensor y = prf.tensor({2, 2}, rg);
    RingTensor c = prf.tensor({2, 2}, rg);

    // additive
    auto xs = share_additive(x, 3, rg, seeds.dealer, 11);
    auto ys = share_additive(y, 3, rg, seeds.dealer, 12);
    std::vector<AdditiveShare> combo;
    for (int p = 0; p < 3; ++p)
        combo.push_back(linear_combine({xs[p], ys[p]}, {3, 2}, &c, rg));
    RingTensor got = reconstruct_additive(combo, rg);
    RingTensor want = ring_add(rg, ring_add(rg, ring_scale(rg, 3, x), ring_scale(rg, 2, y)), c);
    CHECK(got.data == want.data);

    // identity and cancellation
    std::vector<AdditiveShare> ident;
    for (int p = 0; p < 3; ++p) ident.push_back(linear_combine({xs[p]}, {1}, nullptr, rg));
    CHECK(reconstruct_additive(ident, rg).data == x.data);
    std::vector<AdditiveShare> cancel;
    for (int p = 0; p < 3; ++p) cancel.push_back(linear_combine({xs[p], xs[p]}, {1, ~0ULL}, nullptr, rg));
    for (u64 v : reconstruct_additive(cancel, rg).data) CHECK(v == 0);

    // trio
    auto xt = share_trio(x, rg, seeds, 21);
    auto yt = share_trio(y, rg, seeds, 22);
    std::array<TrioShare, 3> tc{linear_combine({xt[0], yt[0]}, {3, 2}, &c, rg),
                                linear_combine({xt[1], yt[1]}, {3, 2}, &c, rg),
                                linear_combine({xt[2], yt[2]}, {3, 2}, &c, rg)};
    CHECK(reconstruct_trio(tc[1], tc[0], rg).data == want.data);
    CHECK(reconstruct_trio(tc[1], tc[2], rg).data == want.data);
}

TEST_CASE("share_trio_wire matches the wire lambda streams") {
    Ring rg(64);
    auto seeds = test_seeds();
    Prf prf(seeds.dealer, 10);
    RingTensor x = prf.tensor({2, 2}, rg);
    auto sh = share_trio_wire(x, 17, seeds, rg);
    RingTensor lam2 = prf_wire_lambda(seeds, 17, 2, x.shape, rg);
    RingTensor lam3 = prf_wire_lambda(seeds, 17, 3, x.shape, rg);
    CHECK(sh[0].a.data == lam2.data);
    CHECK(sh[0].b.data == lam3.data);
    CHECK(sh[1].a.data == ring_add(rg, x, lam3).data);
    CHECK(sh[2].a.data == ring_add(rg, x, lam2).data);
    CHECK(reconstruct_trio(sh[0], sh[1], rg).data == x.data);
}
