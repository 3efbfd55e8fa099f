#include "eavit/model/attention.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "eavit/errors.h"
#include "eavit/tensor/ops.h"

namespace eavit::model {

using namespace eavit::tensor;

namespace {

// Promotes [N_t, D] to [1, N_t, D] so every path below is batched.
template <typename T>
Tensor<T> as_batched(const Tensor<T>& x) {
  if (x.rank() == 3) return x;
  if (x.rank() == 2) return reshape(x, {1, x.dim(0), x.dim(1)});
  throw ShapeError("attention expects [N_t, D] or [B, N_t, D], got " + tensor::to_string(x.shape()));
}

template <typename T>
Tensor<T> restore_rank(const Tensor<T>& y, const Tensor<T>& like) {
  return like.rank() == 2 ? reshape(y, {y.dim(1), y.dim(2)}) : y;
}

void require_heads(std::size_t width, std::size_t heads) {
  if (heads == 0 || width % heads != 0) {
    throw ShapeError("feature width " + std::to_string(width) + " not divisible by " + std::to_string(heads) +
                     " heads");
  }
}

}  // namespace

template <typename T>
Tensor<T> external_attention_map(const Tensor<T>& features, const Tensor<T>& memory_key) {
  if (memory_key.rank() != 2 || memory_key.dim(1) != features.dim(-1)) {
    throw ShapeError("memory " + tensor::to_string(memory_key.shape()) + " does not match features " +
                     tensor::to_string(features.shape()));
  }
  const Tensor<T> scores = matmul(features, transpose(memory_key));
  return l1_normalize_axis(softmax_axis(scores, -2), -1);
}

template <typename T>
Tensor<T> external_attention(const Tensor<T>& features, const Tensor<T>& memory_key,
                             const Tensor<T>& memory_value) {
  if (memory_value.shape() != memory_key.shape()) {
    throw ShapeError("key memory " + tensor::to_string(memory_key.shape()) + " and value memory " +
                     tensor::to_string(memory_value.shape()) + " differ");
  }
  return matmul(external_attention_map(features, memory_key), memory_value);
}

template <typename T>
Tensor<T> multi_head_ea(const Tensor<T>& features, const Tensor<T>& memory_key, const Tensor<T>& memory_value,
                        const Tensor<T>& output_map, std::size_t heads) {
  const std::size_t width = features.dim(-1);
  require_heads(width, heads);
  const std::size_t head_width = width / heads;
  std::vector<Tensor<T>> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor<T> slice_h = heads == 1 ? features : slice(features, -1, h * head_width, head_width);
    outputs.push_back(external_attention(slice_h, memory_key, memory_value));
  }
  const Tensor<T> joined = heads == 1 ? outputs.front() : concat_last_axis(outputs);
  return matmul(joined, output_map);
}

template <typename T>
std::vector<Tensor<T>> self_attention_weights(const Tensor<T>& features, const Tensor<T>& query_map,
                                              const Tensor<T>& key_map, std::size_t heads) {
  const Tensor<T> x = as_batched(features);
  const std::size_t width = x.dim(-1);
  require_heads(width, heads);
  const std::size_t head_width = width / heads;
  const Tensor<T> q = matmul(x, query_map);
  const Tensor<T> k = matmul(x, key_map);
  const T scale = T(1) / std::sqrt(static_cast<T>(head_width));
  std::vector<Tensor<T>> maps;
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor<T> qh = slice(q, -1, h * head_width, head_width);
    const Tensor<T> kh = slice(k, -1, h * head_width, head_width);
    maps.push_back(softmax_axis(mul_scalar(matmul(qh, transpose(kh)), scale), -1));
  }
  return maps;
}

template <typename T>
Tensor<T> self_attention(const Tensor<T>& features, const Tensor<T>& query_map, const Tensor<T>& key_map,
                         const Tensor<T>& value_map, const Tensor<T>& output_map, std::size_t heads) {
  const Tensor<T> x = as_batched(features);
  const std::size_t head_width = x.dim(-1) / std::max<std::size_t>(heads, 1);
  const auto maps = self_attention_weights(x, query_map, key_map, heads);
  const Tensor<T> v = matmul(x, value_map);
  std::vector<Tensor<T>> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    outputs.push_back(matmul(maps[h], slice(v, -1, h * head_width, head_width)));
  }
  const Tensor<T> joined = heads == 1 ? outputs.front() : concat_last_axis(outputs);
  return restore_rank(matmul(joined, output_map), features);
}

#define EAVIT_INSTANTIATE_ATTENTION(T)                                                                   \
  template Tensor<T> external_attention_map(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> external_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> multi_head_ea(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                   std::size_t);                                                         \
  template std::vector<Tensor<T>> self_attention_weights(const Tensor<T>&, const Tensor<T>&,             \
                                                         const Tensor<T>&, std::size_t);                 \
  template Tensor<T> self_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                    const Tensor<T>&, std::size_t);

EAVIT_INSTANTIATE_ATTENTION(float)
EAVIT_INSTANTIATE_ATTENTION(double)

#undef EAVIT_INSTANTIATE_ATTENTION

}  // namespace eavit::model
