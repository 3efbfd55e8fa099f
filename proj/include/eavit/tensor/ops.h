#pragma once

#include <span>
#include <vector>

#include "eavit/tensor/tensor.h"

namespace eavit::tensor {

// Stabiliser in the memory-axis L1 normalisation.
inline constexpr double kL1Epsilon = 1e-12;
// Variance stabiliser in layer normalisation.
inline constexpr double kLayerNormEpsilon = 1e-5;

// a: [..., m, k], b: [k, n] -> [..., m, n]  (b shared by every leading index)
// a: [B, m, k], b: [B, k, n] -> [B, m, n]   (batched)
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Swaps the last two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// b's shape must equal a trailing suffix of a's shape; b is broadcast over the
// remaining leading axes.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// Elementwise product of equally shaped tensors.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T factor);

// Exact (erf based) GELU.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);

template <typename T>
Tensor<T> mean(const Tensor<T>& x);

// exp(x - max) / sum along `axis`.
template <typename T>
Tensor<T> softmax_axis(const Tensor<T>& x, int axis);

// Each slice along `axis` becomes (x + eps/n) / (sum + eps). Rows that already
// sum to one are unchanged up to eps, and an all-zero slice maps to the
// uniform distribution 1/n instead of NaN. Inputs must be non-negative.
template <typename T>
Tensor<T> l1_normalize_axis(const Tensor<T>& x, int axis, double eps = kL1Epsilon);

// Standardises every vector along the last axis, then applies gain and bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     double eps = kLayerNormEpsilon);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);

template <typename T>
Tensor<T> concat_last_axis(const std::vector<Tensor<T>>& parts) {
  return concat(parts, -1);
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t start, std::size_t length);

// Picks `length` tokens starting at `start` along the second-to-last axis.
template <typename T>
Tensor<T> slice_tokens(const Tensor<T>& x, std::size_t start, std::size_t length) {
  return slice(x, -2, start, length);
}

// x: S -> [count, S...]
template <typename T>
Tensor<T> repeat_leading(const Tensor<T>& x, std::size_t count);

// Mean over the batch of -log softmax(logits)[label]. logits: [B, C] or [C].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, int label) {
  const int labels[1] = {label};
  return cross_entropy(logits, std::span<const int>(labels));
}

}  // namespace eavit::tensor
