#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eavit/dsp/image.h"
#include "eavit/model/config.h"
#include "eavit/tensor/tensor.h"

namespace eavit::model {

using tensor::Tensor;

template <typename T>
struct EncoderBlock {
  Tensor<T> attention_norm_gain, attention_norm_bias;
  // External attention: memories [S, d_h] shared by the block's heads.
  Tensor<T> memory_key, memory_value;
  // Self-attention baseline: [D, D] projections.
  Tensor<T> query_map, key_map, value_map;
  Tensor<T> output_map;  // W_o [D, D]
  Tensor<T> mlp_norm_gain, mlp_norm_bias;
  Tensor<T> mlp_in_weight, mlp_in_bias;    // [D, h], [h]
  Tensor<T> mlp_out_weight, mlp_out_bias;  // [h, D], [D]
};

template <typename T>
struct DenseLayer {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]
};

template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> value;
};

template <typename T>
class EAViTModel {
 public:
  // Truncated-normal (std 0.02) patch projection, memories and output maps;
  // Glorot-uniform MLP and query/key/value weights; zero biases, class token
  // and positional embeddings; unit layer-norm gains.
  EAViTModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // All learnable tensors in a fixed declaration order (checkpoint order).
  std::vector<NamedParameter<T>> parameters() const;
  std::size_t parameter_count() const;

  Tensor<T>& patch_projection() { return patch_projection_; }
  Tensor<T>& class_token() { return class_token_; }
  Tensor<T>& positional_embedding() { return positional_embedding_; }
  std::vector<EncoderBlock<T>>& blocks() { return blocks_; }
  std::vector<DenseLayer<T>>& head() { return head_; }

  // [B, N, patch_dim] -> z_0 [B, N + 1, D].
  Tensor<T> embed(const Tensor<T>& patches) const;

  // Pre-norm residual attention sublayer then pre-norm residual MLP sublayer.
  Tensor<T> encoder_block(const Tensor<T>& tokens, std::size_t layer) const;

  // [B, N, patch_dim] -> logits [B, classes].
  Tensor<T> forward(const Tensor<T>& patches) const;

  // Convenience for a single image: logits [classes].
  Tensor<T> forward(const dsp::MelImage& image) const;

 private:
  ModelConfig config_;
  Tensor<T> patch_projection_;
  Tensor<T> class_token_;
  Tensor<T> positional_embedding_;
  std::vector<EncoderBlock<T>> blocks_;
  Tensor<T> final_norm_gain_, final_norm_bias_;
  std::vector<DenseLayer<T>> head_;
};

// Row-major patches of side patch_size, each flattened channel-last, with
// pixels rescaled to [0, 1]. Result [N, patch_size^2 * channels].
template <typename T>
Tensor<T> patchify(const dsp::MelImage& image, std::size_t patch_size);

// Stacks patchify() over a batch: [B, N, patch_dim]. Every image must match
// the configured size and channel count.
template <typename T>
Tensor<T> patchify_batch(std::span<const dsp::MelImage* const> images, const ModelConfig& config);

// Inverse of patchify, for verification.
dsp::MelImage unpatchify(std::span<const double> patches, std::size_t height, std::size_t width,
                         std::size_t channels, std::size_t patch_size);

}  // namespace eavit::model
