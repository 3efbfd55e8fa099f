#include "eavit/tensor/grad_check.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "eavit/tensor/ops.h"

namespace eavit::tensor {
namespace {

double relative(double diff, double a, double b, double floor) {
  const double r = diff / std::max({a, b, floor});
  return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
}

}  // namespace

template <typename T>
GradCheckResult grad_check_params(const std::function<Tensor<T>()>& f,
                                  std::vector<Tensor<T>> params, double h, double floor, bool fourth_order) {
  for (auto& p : params) {
    p.zero_grad();
    p.set_requires_grad(true);
  }
  {
    Tape<T> tape;
    backward(f());
  }
  std::vector<std::vector<T>> analytic;
  for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].data();
    double diff_sq = 0, analytic_sq = 0, numeric_sq = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T saved = values[i];
      auto at = [&](double offset) {
        values[i] = static_cast<T>(saved + offset);
        return static_cast<double>(f().item());
      };
      // Differences use the step actually representable in T.
      const double step = static_cast<double>(static_cast<T>(saved + h)) - static_cast<double>(saved);
      double numeric = (at(step) - at(-step)) / (2.0 * step);
      if (fourth_order) numeric = (4.0 * numeric - (at(2 * step) - at(-2 * step)) / (4.0 * step)) / 3.0;
      values[i] = saved;
      const double a = static_cast<double>(analytic[k][i]);
      const double diff = std::abs(a - numeric);
      diff_sq += diff * diff;
      analytic_sq += a * a;
      numeric_sq += numeric * numeric;
      result.max_absolute_error = std::max(result.max_absolute_error, diff);
      result.max_coordinate_error =
          std::max(result.max_coordinate_error, relative(diff, std::abs(a), std::abs(numeric), floor));
    }
    const double tensor_error =
        relative(std::sqrt(diff_sq), std::sqrt(analytic_sq), std::sqrt(numeric_sq), floor);
    if (tensor_error > result.max_relative_error || k == 0) {
      result.max_relative_error = std::max(result.max_relative_error, tensor_error);
      result.worst_tensor = tensor_error >= result.max_relative_error ? k : result.worst_tensor;
    }
  }
  return result;
}

template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T>& x,
                           double h, double floor, bool fourth_order) {
  return grad_check_params<T>([&] { return f(x); }, {x}, h, floor, fourth_order);
}

template GradCheckResult grad_check<float>(const std::function<Tensor<float>(const Tensor<float>&)>&,
                                           Tensor<float>&, double, double, bool);
template GradCheckResult grad_check<double>(const std::function<Tensor<double>(const Tensor<double>&)>&,
                                            Tensor<double>&, double, double, bool);
template GradCheckResult grad_check_params<float>(const std::function<Tensor<float>()>&,
                                                  std::vector<Tensor<float>>, double, double, bool);
template GradCheckResult grad_check_params<double>(const std::function<Tensor<double>()>&,
                                                   std::vector<Tensor<double>>, double, double, bool);

}  // namespace eavit::tensor
