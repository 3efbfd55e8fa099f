#pragma once

#include <functional>
#include <vector>

#include "eavit/tensor/tensor.h"

namespace eavit::tensor {

struct GradCheckResult {
  // Worst tensor-wise error ||analytic - numeric|| / max(||analytic||, ||numeric||, floor).
  double max_relative_error = 0.0;
  // Worst single coordinate, same formula applied elementwise.
  double max_coordinate_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t worst_tensor = 0;
};

// Compares the backward() gradient of scalar f at x against central
// differences (f(x+h) - f(x-h)) / 2h, coordinate by coordinate. The floor
// keeps gradients that are ~0 from dominating through round-off. With
// fourth_order the five-point stencil is used instead, which tolerates the
// larger steps single precision needs. x is restored before returning.
template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T>& x,
                           double h, double floor = 1e-8, bool fourth_order = false);

// Same, over tensors that f reads implicitly (e.g. model parameters).
template <typename T>
GradCheckResult grad_check_params(const std::function<Tensor<T>()>& f,
                                  std::vector<Tensor<T>> params, double h, double floor = 1e-8, bool fourth_order = false);

}  // namespace eavit::tensor
