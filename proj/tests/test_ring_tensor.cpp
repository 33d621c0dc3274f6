#include <doctest.h>

#include <fstream>
#include <random>

#include "lrmpc/model.hpp"
#include "lrmpc/prng.hpp"

using namespace lrmpc;

namespace {

// independent schoolbook triple loop, kept apart from ring_matmul on purpose
RingTensor schoolbook_matmul(const Ring& rg, const RingTensor& a, const RingTensor& b) {
    std::size_t m = a.shape[0], n = a.shape[1], o = b.shape[1];
    RingTensor out({m, o});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < o; ++j) {
            u64 acc = 0;
            for (std::size_t k = 0; k < n; ++k)
                acc = rg.add(acc, rg.mul(a.data[i * n + k], b.data[k * o + j]));
            out.data[i * o + j] = acc;
        }
    return out;
}

// direct nested-loop convolution over the ring (NHWC, kernel khkwio)
RingTensor direct_conv(const Ring& rg, const RingTensor& x, const RingTensor& w,
                       const ConvShape& cs) {
    std::size_t k = cs.kernel, ic = cs.in_ch, oc = cs.out_ch;
    std::size_t oh = cs.out_h(), ow = cs.out_w();
    RingTensor out({cs.batch * oh * ow, oc});
    for (std::size_t b = 0; b < cs.batch; ++b)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xp = 0; xp < ow; ++xp)
                for (std::size_t co = 0; co < oc; ++co) {
                    u64 acc = 0;
                    for (std::size_t kh = 0; kh < k; ++kh)
                        for (std::size_t kw = 0; kw < k; ++kw) {
                            long sy = static_cast<long>(y * cs.stride + kh) -
                                      static_cast<long>(cs.pad);
                            long sx = static_cast<long>(xp * cs.stride + kw) -
                                      static_cast<long>(cs.pad);
                            if (sy < 0 || sx < 0 || sy >= static_cast<long>(cs.height) ||
                                sx >= static_cast<long>(cs.width))
                                continue;
                            for (std::size_t c = 0; c < ic; ++c)
                                acc = rg.add(
                                    acc,
                                    rg.mul(x.data[((b * cs.height + sy) * cs.width + sx) * ic + c],
                                           w.data[((kh * k + kw) * ic + c) * oc + co]));
                        }
                    out.data[((b * oh + y) * ow + xp) * oc + co] = acc;
                }
    return out;
}

} // namespace

TEST_CASE("fixed point encode examples") {
    FixedPointConfig cfg(64, 5);
    RingTensor t = encode_fixed(RealTensor({1}, {1.5}), cfg);
    CHECK(t.data[0] == 48);
    t = encode_fixed(RealTensor({1}, {-0.25}), cfg);
    CHECK(t.data[0] == (~u64{0}) - 7);  // 2^64 - 8
    t = encode_fixed(RealTensor({1}, {0.0}), cfg);
    CHECK(t.data[0] == 0);
}

TEST_CASE("fixed point decode examples and round trip") {
    FixedPointConfig cfg(64, 5);
    CHECK(decode_fixed(RingTensor({1}, {48}), cfg).data[0] == doctest::Approx(1.5));
    CHECK(decode_fixed(RingTensor({1}, {(~u64{0}) - 7}), cfg).data[0] == doctest::Approx(-0.25));

    // grid round trip is exact; arbitrary reals land within half an ulp
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        double grid = static_cast<double>(static_cast<long>(rng() % 200000) - 100000) / 32.0;
        RealTensor x({1}, {grid});
        CHECK(decode_fixed(encode_fixed(x, cfg), cfg).data[0] == grid);
        std::uniform_real_distribution<double> u(-1000.0, 1000.0);
        double v = u(rng);
        double dec = decode_fixed(encode_fixed(RealTensor({1}, {v}), cfg), cfg).data[0];
        CHECK(std::fabs(dec - v) <= 0.5 / 32.0 + 1e-12);
    }
}

TEST_CASE("encode rejects out-of-range values") {
    FixedPointConfig cfg(16, 4);  // range limit 2^{16-2-4} = 1024
    CHECK_THROWS_AS(encode_fixed(RealTensor({1}, {5000.0}), cfg), std::range_error);
    CHECK_NOTHROW(encode_fixed(RealTensor({1}, {1000.0}), cfg));
}

TEST_CASE("fixed point config invariants") {
    CHECK_THROWS(FixedPointConfig(64, 0));
    CHECK_THROWS(FixedPointConfig(16, 5));   // 3*5+2 > 16
    CHECK_THROWS(FixedPointConfig(70, 5));
    CHECK_NOTHROW(FixedPointConfig(17, 5));
}

TEST_CASE("ring matmul vs schoolbook oracle") {
    Ring rg(64);
    Prf prf(make_master_seed(2), 0);

    RingTensor id({3, 3});
    for (int i = 0; i < 3; ++i) id.data[i * 3 + i] = 1;
    RingTensor a = prf.tensor({3, 3}, rg);
    CHECK(ring_matmul(rg, id, a).data == a.data);

    RingTensor x = RingTensor({1, 1}, {64});
    RingTensor y = RingTensor({1, 1}, {96});
    CHECK(ring_matmul(rg, x, y).data[0] == 6144);

    for (int t = 0; t < 25; ++t) {
        RingTensor p = prf.tensor({4, 4}, rg);
        RingTensor q = prf.tensor({4, 4}, rg);
        CHECK(ring_matmul(rg, p, q).data == schoolbook_matmul(rg, p, q).data);
    }
    // small ring stays reduced
    Ring rg8(8);
    RingTensor p = prf.tensor({4, 4}, rg8);
    RingTensor q = prf.tensor({4, 4}, rg8);
    auto z = ring_matmul(rg8, p, q);
    CHECK(z.data == schoolbook_matmul(rg8, p, q).data);
    for (u64 v : z.data) CHECK(v <= 0xFF);
}

TEST_CASE("ring matmul distributivity") {
    Ring rg(64);
    Prf prf(make_master_seed(3), 0);
    for (int t = 0; t < 10; ++t) {
        RingTensor a = prf.tensor({3, 4}, rg);
        RingTensor b = prf.tensor({4, 2}, rg);
        RingTensor c = prf.tensor({4, 2}, rg);
        auto lhs = ring_add(rg, ring_matmul(rg, a, b), ring_matmul(rg, a, c));
        auto rhs = ring_matmul(rg, a, ring_add(rg, b, c));
        CHECK(lhs.data == rhs.data);
    }
}

TEST_CASE("ring matmul shape mismatch") {
    Ring rg(64);
    CHECK_THROWS(ring_matmul(rg, RingTensor({2, 3}), RingTensor({2, 3})));
}

TEST_CASE("im2col: 1x1 kernel is a reshape") {
    Ring rg(64);
    Prf prf(make_master_seed(4), 0);
    ConvShape cs;
    cs.batch = 2;
    cs.height = 3;
    cs.width = 3;
    cs.in_ch = 4;
    cs.out_ch = 1;
    cs.kernel = 1;
    RingTensor x = prf.tensor({cs.batch, cs.height, cs.width, cs.in_ch}, rg);
    RingTensor p = im2col(x, cs);
    CHECK(p.shape == Shape{18, 4});
    CHECK(p.data == x.data);
}

TEST_CASE("im2col conv equals direct convolution oracle") {
    Ring rg(64);
    Prf prf(make_master_seed(5), 0);
    for (std::size_t stride : {1, 2}) {
        for (std::size_t pad : {std::size_t{0}, std::size_t{1}}) {
            ConvShape cs;
            cs.batch = 1;
            cs.height = 4;
            cs.width = 4;
            cs.in_ch = 2;
            cs.out_ch = 3;
            cs.kernel = 3;
            cs.stride = stride;
            cs.pad = pad;
            if (cs.height + 2 * pad < cs.kernel) continue;
            RingTensor x = prf.tensor({cs.batch, cs.height, cs.width, cs.in_ch}, rg);
            RingTensor w = prf.tensor({3, 3, cs.in_ch, cs.out_ch}, rg);
            RingTensor wflat({9 * cs.in_ch, cs.out_ch}, w.data);
            auto via_matmul = ring_matmul(rg, im2col(x, cs), wflat);
            auto direct = direct_conv(rg, x, w, cs);
            CHECK(via_matmul.data == direct.data);
        }
    }
    // zero input -> zero patches
    ConvShape cs;
    cs.batch = 1;
    cs.height = 4;
    cs.width = 4;
    cs.in_ch = 1;
    cs.out_ch = 1;
    cs.kernel = 3;
    cs.pad = 1;
    RingTensor zero({1, 4, 4, 1});
    auto p = im2col(zero, cs);
    for (u64 v : p.data) CHECK(v == 0);
    CHECK(p.shape == Shape{16, 9});
}

TEST_CASE("plaintext oracle: identity layers") {
    RealTensor x({2, 2}, {1, 2, 3, 4});
    RealTensor id({2, 2}, {1, 0, 0, 1});
    auto out = plaintext_linear_oracle(x, {{PlainLayer::Kind::Matmul, id, {}}});
    CHECK(out.data == x.data);
    CHECK(plaintext_linear_oracle(x, {}).data == x.data);
}

TEST_CASE("plaintext oracle matches the frozen 3-node GCN vector") {
    std::ifstream f("data/gcn3_expected.json");
    if (!f.good()) f.open("tests/data/gcn3_expected.json");  // direct runs from the repo root
    REQUIRE(f.good());
    nlohmann::json j = nlohmann::json::parse(f);
    auto mat = [&](const char* key) {
        std::vector<double> v;
        for (const auto& row : j.at(key))
            for (const auto& x : row) v.push_back(x.get<double>());
        return RealTensor({3, 3}, v);
    };
    RealTensor A = mat("A"), X = mat("X"), W = mat("W"), W2 = mat("W2");
    auto out = plaintext_linear_oracle(X, {{PlainLayer::Kind::PublicMatmulLeft, A, {}},
                                           {PlainLayer::Kind::Matmul, W, {}},
                                           {PlainLayer::Kind::Relu, {}, {}},
                                           {PlainLayer::Kind::PublicMatmulLeft, A, {}},
                                           {PlainLayer::Kind::Matmul, W2, {}}});
    RealTensor want = mat("expected");
    for (std::size_t i = 0; i < 9; ++i) CHECK(out.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));

    // and the demo model bakes the same instance
    GcnDemo demo = make_gcn_demo();
    for (std::size_t i = 0; i < 9; ++i)
        CHECK(demo.expected.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
}
