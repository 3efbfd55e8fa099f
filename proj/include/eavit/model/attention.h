#pragma once

#include <cstddef>
#include <vector>

#include "eavit/tensor/tensor.h"

namespace eavit::model {

using tensor::Tensor;

// Double-normalised attention map of features [..., N_t, d_h] against the key
// memory [S, d_h]: softmax over the token axis, then L1 over the memory axis.
// Result is [..., N_t, S] with every row summing to one.
template <typename T>
Tensor<T> external_attention_map(const Tensor<T>& features, const Tensor<T>& memory_key);

// external_attention_map(F, M_k) * M_v.
template <typename T>
Tensor<T> external_attention(const Tensor<T>& features, const Tensor<T>& memory_key,
                             const Tensor<T>& memory_value);

// Splits [..., N_t, D] into `heads` contiguous slices of width D / heads, runs
// each through external_attention with the same memories, concatenates and
// applies the output map [D, D].
template <typename T>
Tensor<T> multi_head_ea(const Tensor<T>& features, const Tensor<T>& memory_key,
                        const Tensor<T>& memory_value, const Tensor<T>& output_map, std::size_t heads);

// Per-head softmax(Q K^T / sqrt(d_h)) for features [N_t, D] or [B, N_t, D];
// one [B, N_t, N_t] map per head.
template <typename T>
std::vector<Tensor<T>> self_attention_weights(const Tensor<T>& features, const Tensor<T>& query_map,
                                 const Tensor<T>& key_map, std::size_t heads);

// Standard multi-head scaled dot-product self-attention with learned
// projections; same signature shape as multi_head_ea for drop-in use.
template <typename T>
Tensor<T> self_attention(const Tensor<T>& features, const Tensor<T>& query_map, const Tensor<T>& key_map,
                         const Tensor<T>& value_map, const Tensor<T>& output_map, std::size_t heads);

}  // namespace eavit::model
