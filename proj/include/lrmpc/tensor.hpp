#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "lrmpc/ring.hpp"

namespace lrmpc {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_elems(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s);

// Dense row-major tensor of l-bit ring words.
struct RingTensor {
    Shape shape;
    std::vector<u64> data;

    RingTensor() = default;
    explicit RingTensor(Shape s) : shape(std::move(s)), data(shape_elems(shape), 0) {}
    RingTensor(Shape s, std::vector<u64> d);

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return shape.size() >= 1 ? shape[0] : 1; }
    std::size_t cols() const { return shape.size() >= 2 ? shape[1] : 1; }

    bool same_shape(const RingTensor& o) const { return shape == o.shape; }

    static RingTensor scalar(u64 v) { return RingTensor({1}, {v}); }
    static RingTensor zeros(Shape s) { return RingTensor(std::move(s)); }
};

// Dense row-major tensor of doubles (plaintext side).
struct RealTensor {
    Shape shape;
    std::vector<double> data;

    RealTensor() = default;
    explicit RealTensor(Shape s) : shape(std::move(s)), data(shape_elems(shape), 0.0) {}
    RealTensor(Shape s, std::vector<double> d);

    std::size_t size() const { return data.size(); }
    std::size_t rows() const { return shape.size() >= 1 ? shape[0] : 1; }
    std::size_t cols() const { return shape.size() >= 2 ? shape[1] : 1; }
};

// b x h x w x i activations convolved with a k x k x i x o kernel.
struct ConvShape {
    std::size_t batch = 1, height = 1, width = 1, in_ch = 1, out_ch = 1;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t pad = 0;

    std::size_t out_h() const { return (height + 2 * pad - kernel) / stride + 1; }
    std::size_t out_w() const { return (width + 2 * pad - kernel) / stride + 1; }
    // im2col lowering: rows = one patch per output position, cols = k*k*i.
    std::size_t patch_rows() const { return batch * out_h() * out_w(); }
    std::size_t patch_cols() const { return kernel * kernel * in_ch; }
    void validate() const;
};

// -------- ring ops --------

RingTensor ring_add(const Ring& rg, const RingTensor& a, const RingTensor& b);
RingTensor ring_sub(const Ring& rg, const RingTensor& a, const RingTensor& b);
RingTensor ring_neg(const Ring& rg, const RingTensor& a);
RingTensor ring_scale(const Ring& rg, u64 c, const RingTensor& a);
RingTensor ring_elt_mul(const Ring& rg, const RingTensor& a, const RingTensor& b);
// a: m x n, b: n x o -> m x o, wrapping arithmetic.
RingTensor ring_matmul(const Ring& rg, const RingTensor& a, const RingTensor& b);

// Patches laid out so that conv(x, W) == matmul(im2col(x), reshape(W, {k*k*i, o})).
// Row = (b, oh, ow) in row-major order; column = (kh, kw, ci). Padding
// contributes zero words, which under any sharing reconstructs to zero.
RingTensor im2col(const RingTensor& x, const ConvShape& cs);

// -------- fixed point --------

// round(x * 2^f) mod 2^l with round-half-away-from-zero; every |x| must be
// below 2^{l-2-f} (the sign-safe range).
RingTensor encode_fixed(const RealTensor& x, const FixedPointConfig& cfg);
RealTensor decode_fixed(const RingTensor& t, const FixedPointConfig& cfg);

// -------- plaintext reference path --------

RealTensor real_matmul(const RealTensor& a, const RealTensor& b);
RealTensor real_conv2d(const RealTensor& x, const RealTensor& w, const ConvShape& cs);
RealTensor real_relu(const RealTensor& x);
RealTensor real_square(const RealTensor& x);

struct PlainLayer {
    enum class Kind { Matmul, Conv, Square, Relu, PublicMatmulLeft } kind;
    RealTensor weight;   // Matmul: n x o; Conv: k x k x i x o; PublicMatmulLeft: the public left matrix
    ConvShape conv;      // Conv only
};

// Double-precision forward pass used as the reference for every end-to-end check.
RealTensor plaintext_linear_oracle(const RealTensor& x, const std::vector<PlainLayer>& layers);

} // namespace lrmpc
