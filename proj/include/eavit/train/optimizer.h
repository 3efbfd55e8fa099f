#pragma once

#include <cstdint>
#include <vector>

#include "eavit/tensor/tensor.h"

namespace eavit::train {

using tensor::Tensor;

template <typename T>
struct OptimizerState {
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const OptimizerState&) const = default;
};

// Adam with decoupled weight decay, one step over params using their
// accumulated gradients (a parameter without a gradient counts as zero):
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p
// Moment buffers are created on the first call; afterwards their sizes must
// match the parameters or ShapeError is thrown.
template <typename T>
void optimizer_step(const std::vector<Tensor<T>>& params, OptimizerState<T>& state, double learning_rate,
                    double weight_decay);

}  // namespace eavit::train
