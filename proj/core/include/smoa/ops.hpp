#pragma once

#include <vector>

#include "smoa/tensor.hpp"

namespace smoa {

// Differentiable ops over f64 tensors. Each op validates shapes, produces a
// fresh node, and (when gradients are enabled and some input requires them)
// attaches a backward closure. Backward closures only touch parents that
// require grad, so frozen branches cost nothing in the reverse sweep.

Tensor matmul(const Tensor& a, const Tensor& b);  // [m×k]·[k×n]
Tensor transpose(const Tensor& a);                // [m×n] → [n×m]

Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double s);

// a [m×n] plus bias [n], added to every row.
Tensor add_row_broadcast(const Tensor& a, const Tensor& bias);

// Row i of a [m×n] multiplied by w[i]; w is [m] or [m×1].
Tensor scale_rows(const Tensor& a, const Tensor& w);

// Softmax along one axis of a tensor of any rank; numerically stabilized by
// max subtraction. Rank-2 axis 0/1 take vectorized paths.
Tensor softmax_axis(const Tensor& a, int64_t axis);
inline Tensor softmax_rows(const Tensor& a) { return softmax_axis(a, 1); }
inline Tensor softmax_cols(const Tensor& a) { return softmax_axis(a, 0); }

// Per-row normalization of x [m×n] with learned gain/shift [n].
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// tanh-form Gaussian error linear unit.
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);

// Mean negative log-likelihood of the true classes under row-softmax of
// logits [B×K]. Returns a scalar.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

Tensor slice_rows(const Tensor& a, int64_t start, int64_t count);
Tensor slice_cols(const Tensor& a, int64_t start, int64_t count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);

Tensor mean_rows(const Tensor& a);  // [m×n] → [1×n]
Tensor sum_all(const Tensor& a);    // scalar

// x·w + b. Composition of matmul and add_row_broadcast.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

}  // namespace smoa
