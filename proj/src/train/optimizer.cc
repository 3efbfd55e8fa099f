#include "eavit/train/optimizer.h"

#include <cmath>

#include "eavit/errors.h"

namespace eavit::train {

template <typename T>
void optimizer_step(const std::vector<Tensor<T>>& params, OptimizerState<T>& state, double learning_rate,
                    double weight_decay) {
  if (state.step == 0 && state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), T(0));
      state.second_moment.emplace_back(p.numel(), T(0));
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("optimizer state holds " + std::to_string(state.first_moment.size()) +
                     " buffers for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (state.first_moment[k].size() != params[k].numel() || state.second_moment[k].size() != params[k].numel()) {
      throw ShapeError("optimizer buffer " + std::to_string(k) + " does not match parameter shape " +
                       tensor::to_string(params[k].shape()));
    }
  }

  ++state.step;
  const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T> handle = params[k];
    auto values = handle.data();
    const bool has_grad = params[k].has_grad();
    const auto grad = has_grad ? params[k].grad() : std::span<const T>{};
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has_grad ? static_cast<double>(grad[i]) : 0.0;
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double p = values[i];
      const double update = (mi / correction1) / (std::sqrt(vi / correction2) + state.eps);
      values[i] = static_cast<T>(p - learning_rate * update - learning_rate * weight_decay * p);
    }
  }
}

template void optimizer_step<float>(const std::vector<Tensor<float>>&, OptimizerState<float>&, double, double);
template void optimizer_step<double>(const std::vector<Tensor<double>>&, OptimizerState<double>&, double, double);

}  // namespace eavit::train
