#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace eavit::model {

enum class AttentionKind { kExternal, kSelf };

std::string to_string(AttentionKind kind);
AttentionKind parse_attention_kind(const std::string& text);

struct ModelConfig {
  std::size_t image_size = 256;
  std::size_t patch_size = 64;  // 16 patches at 256 x 256
  std::size_t channels = 1;
  std::size_t projection_dim = 32;
  std::size_t layers = 16;
  std::size_t heads = 8;
  std::size_t memory_size = 64;
  double memory_init_std = 0.02;  // truncated at two standard deviations
  std::size_t mlp_hidden = 0;  // 0 means 2 * projection_dim
  std::vector<std::size_t> head_hidden = {2048, 1024};
  std::size_t classes = 10;
  AttentionKind attention = AttentionKind::kExternal;

  // Throws UsageError when a dimension is zero or does not divide.
  void validate() const;

  std::size_t num_patches() const {
    const std::size_t side = image_size / patch_size;
    return side * side;
  }
  std::size_t tokens() const { return num_patches() + 1; }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }
  std::size_t head_dim() const { return projection_dim / heads; }
  std::size_t encoder_mlp_hidden() const { return mlp_hidden ? mlp_hidden : 2 * projection_dim; }

  bool operator==(const ModelConfig&) const = default;
};

// Learnable scalars, summed per component:
//   patch projection          patch_dim * D
//   class token               D
//   positional embedding      (N + 1) * D
//   per encoder block         2 layer norms (4D)
//                             + external: memories 2 * S * d_h, output map D^2
//                             + self:     Q, K, V and output maps 4 * D^2
//                             + MLP D*h + h + h*D + D
//   final layer norm          2D
//   head                      sum over dense layers of in*out + out
std::size_t param_count(const ModelConfig& config);

}  // namespace eavit::model
