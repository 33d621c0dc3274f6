#include "lrmpc/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lrmpc {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

RingTensor::RingTensor(Shape s, std::vector<u64> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_elems(shape))
        throw std::invalid_argument("ring tensor data size does not match shape " + shape_str(shape));
}

RealTensor::RealTensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_elems(shape))
        throw std::invalid_argument("real tensor data size does not match shape " + shape_str(shape));
    for (double v : data)
        if (!std::isfinite(v)) throw std::invalid_argument("real tensor requires finite values");
}

void ConvShape::validate() const {
    if (kernel != 1 && kernel != 3) throw std::invalid_argument("conv kernel must be 1 or 3");
    if (stride == 0) throw std::invalid_argument("conv stride must be positive");
    if (height + 2 * pad < kernel || width + 2 * pad < kernel)
        throw std::invalid_argument("conv input smaller than kernel");
}

static void check_same_shape(const RingTensor& a, const RingTensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

RingTensor ring_add(const Ring& rg, const RingTensor& a, const RingTensor& b) {
    check_same_shape(a, b, "ring_add");
    RingTensor out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = rg.add(a.data[i], b.data[i]);
    return out;
}

RingTensor ring_sub(const Ring& rg, const RingTensor& a, const RingTensor& b) {
    check_same_shape(a, b, "ring_sub");
    RingTensor out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = rg.sub(a.data[i], b.data[i]);
    return out;
}

RingTensor ring_neg(const Ring& rg, const RingTensor& a) {
    RingTensor out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = rg.neg(a.data[i]);
    return out;
}

RingTensor ring_scale(const Ring& rg, u64 c, const RingTensor& a) {
    RingTensor out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = rg.mul(c, a.data[i]);
    return out;
}

RingTensor ring_elt_mul(const Ring& rg, const RingTensor& a, const RingTensor& b) {
    check_same_shape(a, b, "ring_elt_mul");
    RingTensor out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = rg.mul(a.data[i], b.data[i]);
    return out;
}

RingTensor ring_matmul(const Ring& rg, const RingTensor& a, const RingTensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
        throw std::invalid_argument("ring_matmul: incompatible dims " + shape_str(a.shape) + " x " +
                                    shape_str(b.shape));
    std::size_t m = a.shape[0], n = a.shape[1], o = b.shape[1];
    RingTensor out({m, o});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            u64 aik = a.data[i * n + k];
            if (aik == 0) continue;
            const u64* brow = &b.data[k * o];
            u64* orow = &out.data[i * o];
            for (std::size_t j = 0; j < o; ++j) orow[j] += aik * brow[j];
        }
    }
    if (rg.l < 64)
        for (auto& v : out.data) v &= rg.mask;
    return out;
}

RingTensor im2col(const RingTensor& x, const ConvShape& cs) {
    cs.validate();
    if (x.size() != cs.batch * cs.height * cs.width * cs.in_ch)
        throw std::invalid_argument("im2col: input size does not match conv shape");
    std::size_t oh = cs.out_h(), ow = cs.out_w(), k = cs.kernel, ic = cs.in_ch;
    RingTensor out({cs.patch_rows(), cs.patch_cols()});
    std::size_t row = 0;
    for (std::size_t b = 0; b < cs.batch; ++b) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xp = 0; xp < ow; ++xp, ++row) {
                u64* dst = &out.data[row * cs.patch_cols()];
                for (std::size_t kh = 0; kh < k; ++kh) {
                    for (std::size_t kw = 0; kw < k; ++kw) {
                        // signed source coordinates; out-of-bounds stays zero (padding)
                        long sy = static_cast<long>(y * cs.stride + kh) - static_cast<long>(cs.pad);
                        long sx = static_cast<long>(xp * cs.stride + kw) - static_cast<long>(cs.pad);
                        if (sy < 0 || sx < 0 || sy >= static_cast<long>(cs.height) ||
                            sx >= static_cast<long>(cs.width))
                            continue;
                        const u64* src =
                            &x.data[((b * cs.height + sy) * cs.width + sx) * ic];
                        for (std::size_t c = 0; c < ic; ++c)
                            dst[(kh * k + kw) * ic + c] = src[c];
                    }
                }
            }
        }
    }
    return out;
}

RingTensor encode_fixed(const RealTensor& x, const FixedPointConfig& cfg) {
    Ring rg = cfg.ring();
    double scale = static_cast<double>(1ULL << cfg.f);
    double limit = std::ldexp(1.0, static_cast<int>(cfg.l - 2 - cfg.f));
    RingTensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        double v = x.data[i];
        if (!(std::fabs(v) < limit)) {
            std::ostringstream os;
            os << "encoding overflow at index " << i << ": |" << v << "| >= 2^" << (cfg.l - 2 - cfg.f);
            throw std::range_error(os.str());
        }
        double scaled = v * scale;
        // round half away from zero, symmetric around 0
        double r = scaled >= 0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
        out.data[i] = rg.from_signed(static_cast<i64>(r));
    }
    return out;
}

RealTensor decode_fixed(const RingTensor& t, const FixedPointConfig& cfg) {
    Ring rg = cfg.ring();
    double scale = static_cast<double>(1ULL << cfg.f);
    RealTensor out(t.shape);
    for (std::size_t i = 0; i < t.size(); ++i)
        out.data[i] = static_cast<double>(rg.to_signed(t.data[i])) / scale;
    return out;
}

RealTensor real_matmul(const RealTensor& a, const RealTensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
        throw std::invalid_argument("real_matmul: incompatible dims");
    std::size_t m = a.shape[0], n = a.shape[1], o = b.shape[1];
    RealTensor out({m, o});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            double aik = a.data[i * n + k];
            for (std::size_t j = 0; j < o; ++j) out.data[i * o + j] += aik * b.data[k * o + j];
        }
    return out;
}

RealTensor real_conv2d(const RealTensor& x, const RealTensor& w, const ConvShape& cs) {
    cs.validate();
    std::size_t k = cs.kernel, ic = cs.in_ch, oc = cs.out_ch;
    if (w.size() != k * k * ic * oc) throw std::invalid_argument("real_conv2d: kernel size mismatch");
    std::size_t oh = cs.out_h(), ow = cs.out_w();
    RealTensor out({cs.batch, oh, ow, oc});
    for (std::size_t b = 0; b < cs.batch; ++b)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xp = 0; xp < ow; ++xp)
                for (std::size_t co = 0; co < oc; ++co) {
                    double acc = 0;
                    for (std::size_t kh = 0; kh < k; ++kh)
                        for (std::size_t kw = 0; kw < k; ++kw) {
                            long sy = static_cast<long>(y * cs.stride + kh) - static_cast<long>(cs.pad);
                            long sx = static_cast<long>(xp * cs.stride + kw) - static_cast<long>(cs.pad);
                            if (sy < 0 || sx < 0 || sy >= static_cast<long>(cs.height) ||
                                sx >= static_cast<long>(cs.width))
                                continue;
                            for (std::size_t c = 0; c < ic; ++c)
                                acc += x.data[((b * cs.height + sy) * cs.width + sx) * ic + c] *
                                       w.data[((kh * k + kw) * ic + c) * oc + co];
                        }
                    out.data[((b * oh + y) * ow + xp) * oc + co] = acc;
                }
    return out;
}

RealTensor real_relu(const RealTensor& x) {
    RealTensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] > 0 ? x.data[i] : 0.0;
    return out;
}

RealTensor real_square(const RealTensor& x) {
    RealTensor out(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x.data[i] * x.data[i];
    return out;
}

RealTensor plaintext_linear_oracle(const RealTensor& x, const std::vector<PlainLayer>& layers) {
    RealTensor cur = x;
    // conv outputs are b x oh x ow x c; a following matmul consumes them as
    // (b*oh*ow) x c
    auto as_matrix = [](RealTensor t) {
        if (t.shape.size() != 2) {
            std::size_t cols = t.shape.empty() ? 1 : t.shape.back();
            t.shape = {t.size() / cols, cols};
        }
        return t;
    };
    for (const auto& ly : layers) {
        switch (ly.kind) {
        case PlainLayer::Kind::Matmul:
            cur = real_matmul(as_matrix(std::move(cur)), ly.weight);
            break;
        case PlainLayer::Kind::Conv: {
            ConvShape cs = ly.conv;
            cur = real_conv2d(cur, ly.weight, cs);
            break;
        }
        case PlainLayer::Kind::Square:
            cur = real_square(cur);
            break;
        case PlainLayer::Kind::Relu:
            cur = real_relu(cur);
            break;
        case PlainLayer::Kind::PublicMatmulLeft:
            cur = real_matmul(ly.weight, as_matrix(std::move(cur)));
            break;
        }
    }
    return cur;
}

} // namespace lrmpc
