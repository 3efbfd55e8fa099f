#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "eavit/cli/cli.h"
#include "eavit/model/attention.h"

namespace eavit::cli {
namespace {

using tensor::Shape;
using tensor::Tensor;

Tensor<float> random_tensor(Shape shape, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<float> values(tensor::numel(shape));
  for (auto& v : values) v = static_cast<float>(dist(rng));
  return Tensor<float>(std::move(shape), std::move(values));
}

template <typename Fn>
double median_ms(std::size_t repeats, Fn&& fn) {
  fn();  // warm-up
  std::vector<double> times;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  return times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

}  // namespace

std::vector<BenchRow> bench_attention(const BenchOptions& o) {
  std::mt19937_64 rng(o.seed);
  const std::size_t head_dim = o.dim / o.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(o.dim));
  const auto memory_key = random_tensor({o.memory, head_dim}, rng, 0.02);
  const auto memory_value = random_tensor({o.memory, head_dim}, rng, 0.02);
  const auto wq = random_tensor({o.dim, o.dim}, rng, scale);
  const auto wk = random_tensor({o.dim, o.dim}, rng, scale);
  const auto wv = random_tensor({o.dim, o.dim}, rng, scale);
  const auto wo = random_tensor({o.dim, o.dim}, rng, scale);

  std::vector<BenchRow> rows;
  for (const char* kind : {"external", "self"}) {
    const bool external = std::string(kind) == "external";
    for (std::size_t n : o.tokens) {
      const auto x = random_tensor({o.batch, n, o.dim}, rng, 1.0);
      const double ms = median_ms(o.repeats, [&] {
        if (external) {
          model::multi_head_ea(x, memory_key, memory_value, wo, o.heads);
        } else {
          model::self_attention(x, wq, wk, wv, wo, o.heads);
        }
      });
      rows.push_back({kind, n, ms});
    }
  }
  return rows;
}

}  // namespace eavit::cli
