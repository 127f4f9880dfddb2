#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "muco/grad/tensor.hpp"

// Differentiable operations. Tensors are rank 1 ([d]) or rank 2 ([n, d]),
// row-major. There is no broadcasting except the row-wise bias in affine();
// every other shape mismatch raises DimensionError naming both shapes.
namespace muco::grad {

inline constexpr double kNormEpsilon = 1e-12;
inline constexpr double kDistributionTolerance = 1e-9;

/// input[n, d_in] * weight[d_in, d_out] + bias[d_out] -> [n, d_out]
Tensor affine(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// a[n, d] * b[k, d]^T -> [n, k]
Tensor matmul_nt(const Tensor& a, const Tensor& b);

/// L2 normalization of a vector, or of every row of a matrix. Uses the exact
/// Jacobian (I - u u^T) / ||v||. Throws DegenerateInputError when a norm is
/// at or below kNormEpsilon.
Tensor l2_normalize(const Tensor& v);

/// -a^T b for two vectors of equal length; returns shape [1].
Tensor neg_dot(const Tensor& a, const Tensor& b);

/// Multiplies every element by the single value held in s (shape [1]).
Tensor scale(const Tensor& x, const Tensor& s);
Tensor scale(const Tensor& x, double factor);

Tensor add(const Tensor& a, const Tensor& b);
Tensor tanh(const Tensor& x);

/// |a - b| elementwise. The subgradient at a == b is 0.
Tensor abs_diff(const Tensor& a, const Tensor& b);

/// Concatenation of vectors, or column-wise concatenation of matrices with
/// equal row counts.
Tensor concat(const std::vector<Tensor>& parts);

/// Row mean of [n, d] -> [d].
Tensor mean_rows(const Tensor& x);

/// Sum of all elements -> [1].
Tensor sum(const Tensor& x);

/// Rows of table[V, d] selected by ids -> [ids.size(), d].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);

/// Same values viewed with a new shape of equal element count.
Tensor reshape(const Tensor& x, Shape shape);

/// Cross-entropy -sum_i target_i log softmax(logits)_i using the max-shifted
/// log-sum-exp. Accepts a single [k] row or a batch [n, k]; batches return the
/// mean over rows. Targets must be nonnegative and sum to 1 per row.
Tensor softmax_xent(const Tensor& logits, const Tensor& target);

/// Stable binary cross-entropy of sigmoid(logit) against 0/1 labels. Accepts
/// [1] or [n] logits; returns the mean over entries.
Tensor sigmoid_bce(const Tensor& logits, std::span<const double> labels);
Tensor sigmoid_bce(const Tensor& logit, double label);

// Plain numeric helpers, no recording.
std::vector<double> softmax(std::span<const double> logits);
double sigmoid(double x);
double log_sum_exp(std::span<const double> x);

}  // namespace muco::grad
