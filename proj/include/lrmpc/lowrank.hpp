#pragma once

#include "lrmpc/tensor.hpp"

namespace lrmpc {

// W ~= U.V with the singular values folded into U, so V keeps orthonormal
// rows (that bounds error amplification through the second multiply).
struct LowRankFactors {
    RealTensor U;  // n x r, or 3x3xi x r for conv kernels
    RealTensor V;  // r x o, or 1x1xr x o
    std::size_t rank = 0;
    double ratio = 0.0;           // r/min(n,o) for FC, r/o for conv
    double frobenius_error = 0.0; // ||W - U.V||_F
    std::vector<double> singular_values;  // all of them, descending
};

struct MultCount {
    u64 full = 0;  // m*n*o
    u64 low = 0;   // m*n*r + m*r*o
    bool beneficial = false;  // strictly fewer multiplications: r < n*o/(n+o)
};

// Rank-r factorization of an n x o matrix via one-sided Jacobi rotations.
// Error matches the Eckart-Young optimum sqrt(sum_{k>r} sigma_k^2).
LowRankFactors svd_factorize(const RealTensor& W, std::size_t r, std::size_t max_sweeps = 100,
                             double tol = 1e-12);

// 3x3xi x o kernel -> 3x3xi x r followed by a 1x1 conv r -> o. The pair
// composes to the same (9i) x o linear map as U.V.
LowRankFactors conv_factorize(const RealTensor& W, std::size_t r, std::size_t max_sweeps = 100,
                              double tol = 1e-12);

enum class LayerClass { FC, Conv };

// r = max(1, round(ratio * base)), base = o for conv, min(n,o) for FC.
std::size_t choose_rank(LayerClass kind, std::size_t n, std::size_t o, double ratio);

MultCount mult_count(std::size_t m, std::size_t n, std::size_t o, std::size_t r);

} // namespace lrmpc
