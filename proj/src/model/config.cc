#include "eavit/model/config.h"

#include "eavit/errors.h"

namespace eavit::model {

std::string to_string(AttentionKind kind) { return kind == AttentionKind::kExternal ? "external" : "self"; }

AttentionKind parse_attention_kind(const std::string& text) {
  if (text == "external") return AttentionKind::kExternal;
  if (text == "self") return AttentionKind::kSelf;
  throw UsageError("attention must be 'external' or 'self', got '" + text + "'");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw UsageError(std::string(name) + " must be positive");
  };
  positive(image_size, "image_size");
  positive(patch_size, "patch_size");
  positive(projection_dim, "projection_dim");
  positive(layers, "layers");
  positive(heads, "heads");
  positive(memory_size, "memory_size");
  positive(classes, "classes");
  if (!(memory_init_std > 0)) throw UsageError("memory_init_std must be positive");
  if (channels != 1 && channels != 3) throw UsageError("channels must be 1 or 3");
  if (image_size % patch_size != 0) {
    throw UsageError("image_size " + std::to_string(image_size) + " not divisible by patch_size " +
                     std::to_string(patch_size));
  }
  if (projection_dim % heads != 0) {
    throw UsageError("projection_dim " + std::to_string(projection_dim) + " not divisible by heads " +
                     std::to_string(heads));
  }
  for (std::size_t h : head_hidden) positive(h, "head_hidden entries");
}

std::size_t param_count(const ModelConfig& c) {
  c.validate();
  const std::size_t d = c.projection_dim;
  const std::size_t hidden = c.encoder_mlp_hidden();
  std::size_t total = c.patch_dim() * d + d + c.tokens() * d;
  std::size_t block = 4 * d + d * hidden + hidden + hidden * d + d;
  if (c.attention == AttentionKind::kExternal) {
    block += 2 * c.memory_size * c.head_dim() + d * d;
  } else {
    block += 4 * d * d;
  }
  total += c.layers * block;
  total += 2 * d;
  std::size_t in = d;
  for (std::size_t width : c.head_hidden) {
    total += in * width + width;
    in = width;
  }
  total += in * c.classes + c.classes;
  return total;
}

}  // namespace eavit::model
