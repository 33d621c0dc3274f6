#include "lrmpc/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lrmpc {

namespace {

// One-sided Jacobi: rotate column pairs of B (copy of W) until all pairs are
// orthogonal; the rotations accumulate into V. Afterwards B = U.Sigma and
// W = B.V^T, i.e. sigma_k = |b_k| and v_k is V's k-th column.
struct JacobiResult {
    std::vector<double> B;  // n x o, column-orthogonal
    std::vector<double> V;  // o x o, orthogonal
    std::vector<double> sigma;
    std::vector<std::size_t> order;  // column indices sorted by sigma desc
};

JacobiResult one_sided_jacobi(const RealTensor& W, std::size_t max_sweeps, double tol) {
    std::size_t n = W.rows(), o = W.cols();
    JacobiResult r;
    r.B.assign(n * o, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < o; ++j) r.B[i * o + j] = W.data[i * o + j];
    r.V.assign(o * o, 0.0);
    for (std::size_t j = 0; j < o; ++j) r.V[j * o + j] = 1.0;

    auto col_dot = [&](const std::vector<double>& m, std::size_t rows, std::size_t cols,
                       std::size_t p, std::size_t q) {
        double acc = 0;
        for (std::size_t i = 0; i < rows; ++i) acc += m[i * cols + p] * m[i * cols + q];
        return acc;
    };
    auto rotate_cols = [&](std::vector<double>& m, std::size_t rows, std::size_t cols,
                           std::size_t p, std::size_t q, double c, double s) {
        for (std::size_t i = 0; i < rows; ++i) {
            double bp = m[i * cols + p], bq = m[i * cols + q];
            m[i * cols + p] = c * bp - s * bq;
            m[i * cols + q] = s * bp + c * bq;
        }
    };

    // columns whose mass is negligible against the (rotation-invariant)
    // Frobenius norm are numerically zero and must not stall convergence
    double frob2 = 0;
    for (double v : r.B) frob2 += v * v;

    bool converged = false;
    for (std::size_t sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < o; ++p) {
            for (std::size_t q = p + 1; q < o; ++q) {
                double alpha = col_dot(r.B, n, o, p, p);
                double beta = col_dot(r.B, n, o, q, q);
                double gamma = col_dot(r.B, n, o, p, q);
                if (gamma == 0.0 || std::fabs(gamma) <= tol * std::sqrt(alpha * beta) ||
                    std::sqrt(alpha * beta) <= 1e-30 * frob2)
                    continue;
                converged = false;
                double zeta = (beta - alpha) / (2.0 * gamma);
                double t = (zeta >= 0 ? 1.0 : -1.0) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                double c = 1.0 / std::sqrt(1.0 + t * t);
                double s = c * t;
                rotate_cols(r.B, n, o, p, q, c, s);
                rotate_cols(r.V, o, o, p, q, c, s);
            }
        }
    }
    if (!converged)
        throw std::runtime_error("svd did not converge within the sweep cap");

    r.sigma.resize(o);
    for (std::size_t j = 0; j < o; ++j) r.sigma[j] = std::sqrt(col_dot(r.B, n, o, j, j));
    r.order.resize(o);
    std::iota(r.order.begin(), r.order.end(), std::size_t{0});
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](std::size_t a, std::size_t b) { return r.sigma[a] > r.sigma[b]; });
    return r;
}

} // namespace

LowRankFactors svd_factorize(const RealTensor& W, std::size_t r, std::size_t max_sweeps,
                             double tol) {
    if (W.shape.size() != 2) throw std::invalid_argument("svd_factorize expects a matrix");
    std::size_t n = W.rows(), o = W.cols();
    if (r < 1 || r > std::min(n, o)) throw std::invalid_argument("rank out of range");

    JacobiResult j = one_sided_jacobi(W, max_sweeps, tol);

    LowRankFactors out;
    out.rank = r;
    out.ratio = static_cast<double>(r) / static_cast<double>(std::min(n, o));
    out.U = RealTensor({n, r});
    out.V = RealTensor({r, o});
    out.singular_values.resize(o);
    for (std::size_t k = 0; k < o; ++k) out.singular_values[k] = j.sigma[j.order[k]];

    for (std::size_t k = 0; k < r; ++k) {
        std::size_t col = j.order[k];
        double sk = j.sigma[col];
        // U column = b_col (already sigma-scaled); V row = v_col^T
        for (std::size_t i = 0; i < n; ++i) out.U.data[i * r + k] = j.B[i * o + col];
        if (sk > 0)
            for (std::size_t jj = 0; jj < o; ++jj) out.V.data[k * o + jj] = j.V[jj * o + col];
        // a zero singular value leaves a zero U column and V row, harmless
    }

    double err2 = 0;
    for (std::size_t k = r; k < o; ++k) err2 += out.singular_values[k] * out.singular_values[k];
    out.frobenius_error = std::sqrt(err2);
    return out;
}

LowRankFactors conv_factorize(const RealTensor& W, std::size_t r, std::size_t max_sweeps,
                              double tol) {
    if (W.shape.size() != 4) throw std::invalid_argument("conv_factorize expects k x k x i x o");
    std::size_t k = W.shape[0], ic = W.shape[2], oc = W.shape[3];
    if (W.shape[1] != k) throw std::invalid_argument("conv kernels must be square");
    // (kh, kw, ci, co) row-major already flattens to a (k*k*i) x o matrix
    RealTensor flat({k * k * ic, oc}, W.data);
    LowRankFactors f = svd_factorize(flat, r, max_sweeps, tol);
    f.ratio = static_cast<double>(r) / static_cast<double>(oc);
    f.U = RealTensor({k, k, ic, r}, std::move(f.U.data));
    f.V = RealTensor({1, 1, r, oc}, std::move(f.V.data));
    return f;
}

std::size_t choose_rank(LayerClass kind, std::size_t n, std::size_t o, double ratio) {
    if (!(ratio > 0.0) || ratio > 1.0) throw std::invalid_argument("rank ratio must be in (0,1]");
    std::size_t base = kind == LayerClass::Conv ? o : std::min(n, o);
    auto r = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(base)));
    return std::max<std::size_t>(1, r);
}

MultCount mult_count(std::size_t m, std::size_t n, std::size_t o, std::size_t r) {
    if (m < 1 || n < 1 || o < 1 || r < 1) throw std::invalid_argument("dims must be positive");
    MultCount c;
    c.full = static_cast<u64>(m) * n * o;
    c.low = static_cast<u64>(m) * n * r + static_cast<u64>(m) * r * o;
    c.beneficial = static_cast<u64>(r) * (n + o) < static_cast<u64>(n) * o;
    return c;
}

} // namespace lrmpc
