#include "eavit/model/eavit.h"

#include <cmath>
#include <random>

#include "eavit/errors.h"
#include "eavit/model/attention.h"
#include "eavit/tensor/ops.h"

namespace eavit::model {

using namespace eavit::tensor;

namespace {

constexpr double kInitStd = 0.02;

template <typename T>
Tensor<T> truncated_normal(Shape shape, std::mt19937_64& rng, double std_dev = kInitStd) {
  std::normal_distribution<double> dist(0.0, std_dev);
  std::vector<T> values(tensor::numel(shape));
  for (auto& v : values) {
    double x;
    do {
      x = dist(rng);
    } while (std::abs(x) > 2 * std_dev);
    v = static_cast<T>(x);
  }
  return Tensor<T>::parameter(std::move(shape), std::move(values));
}

template <typename T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<T> values(fan_in * fan_out);
  for (auto& v : values) v = static_cast<T>(dist(rng));
  return Tensor<T>::parameter({fan_in, fan_out}, std::move(values));
}

template <typename T>
Tensor<T> filled(Shape shape, T value) {
  return Tensor<T>::parameter(shape, std::vector<T>(tensor::numel(shape), value));
}

}  // namespace

template <typename T>
EAViTModel<T>::EAViTModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.projection_dim;
  const std::size_t hidden = config_.encoder_mlp_hidden();

  patch_projection_ = truncated_normal<T>({config_.patch_dim(), d}, rng);
  class_token_ = filled<T>({1, d}, T(0));
  positional_embedding_ = filled<T>({config_.tokens(), d}, T(0));

  for (std::size_t l = 0; l < config_.layers; ++l) {
    EncoderBlock<T> b;
    b.attention_norm_gain = filled<T>({d}, T(1));
    b.attention_norm_bias = filled<T>({d}, T(0));
    if (config_.attention == AttentionKind::kExternal) {
      b.memory_key = truncated_normal<T>({config_.memory_size, config_.head_dim()}, rng, config_.memory_init_std);
      b.memory_value = truncated_normal<T>({config_.memory_size, config_.head_dim()}, rng, config_.memory_init_std);
    } else {
      b.query_map = glorot_uniform<T>(d, d, rng);
      b.key_map = glorot_uniform<T>(d, d, rng);
      b.value_map = glorot_uniform<T>(d, d, rng);
    }
    b.output_map = truncated_normal<T>({d, d}, rng);
    b.mlp_norm_gain = filled<T>({d}, T(1));
    b.mlp_norm_bias = filled<T>({d}, T(0));
    b.mlp_in_weight = glorot_uniform<T>(d, hidden, rng);
    b.mlp_in_bias = filled<T>({hidden}, T(0));
    b.mlp_out_weight = glorot_uniform<T>(hidden, d, rng);
    b.mlp_out_bias = filled<T>({d}, T(0));
    blocks_.push_back(std::move(b));
  }

  final_norm_gain_ = filled<T>({d}, T(1));
  final_norm_bias_ = filled<T>({d}, T(0));
  std::size_t in = d;
  std::vector<std::size_t> widths = config_.head_hidden;
  widths.push_back(config_.classes);
  for (std::size_t width : widths) {
    head_.push_back({glorot_uniform<T>(in, width, rng), filled<T>({width}, T(0))});
    in = width;
  }
}

template <typename T>
std::vector<NamedParameter<T>> EAViTModel<T>::parameters() const {
  std::vector<NamedParameter<T>> out;
  out.push_back({"patch_projection", patch_projection_});
  out.push_back({"class_token", class_token_});
  out.push_back({"positional_embedding", positional_embedding_});
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& b = blocks_[l];
    const std::string p = "block" + std::to_string(l) + ".";
    out.push_back({p + "attention_norm.gain", b.attention_norm_gain});
    out.push_back({p + "attention_norm.bias", b.attention_norm_bias});
    if (config_.attention == AttentionKind::kExternal) {
      out.push_back({p + "memory_key", b.memory_key});
      out.push_back({p + "memory_value", b.memory_value});
    } else {
      out.push_back({p + "query_map", b.query_map});
      out.push_back({p + "key_map", b.key_map});
      out.push_back({p + "value_map", b.value_map});
    }
    out.push_back({p + "output_map", b.output_map});
    out.push_back({p + "mlp_norm.gain", b.mlp_norm_gain});
    out.push_back({p + "mlp_norm.bias", b.mlp_norm_bias});
    out.push_back({p + "mlp_in.weight", b.mlp_in_weight});
    out.push_back({p + "mlp_in.bias", b.mlp_in_bias});
    out.push_back({p + "mlp_out.weight", b.mlp_out_weight});
    out.push_back({p + "mlp_out.bias", b.mlp_out_bias});
  }
  out.push_back({"final_norm.gain", final_norm_gain_});
  out.push_back({"final_norm.bias", final_norm_bias_});
  for (std::size_t i = 0; i < head_.size(); ++i) {
    out.push_back({"head" + std::to_string(i) + ".weight", head_[i].weight});
    out.push_back({"head" + std::to_string(i) + ".bias", head_[i].bias});
  }
  return out;
}

template <typename T>
std::size_t EAViTModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value.numel();
  return n;
}

template <typename T>
Tensor<T> EAViTModel<T>::embed(const Tensor<T>& patches) const {
  if (patches.rank() != 3 || patches.dim(1) != config_.num_patches() || patches.dim(2) != config_.patch_dim()) {
    throw ShapeError("embed expects [B, " + std::to_string(config_.num_patches()) + ", " +
                     std::to_string(config_.patch_dim()) + "], got " + tensor::to_string(patches.shape()));
  }
  const Tensor<T> projected = matmul(patches, patch_projection_);
  const Tensor<T> with_class = concat(std::vector<Tensor<T>>{repeat_leading(class_token_, patches.dim(0)), projected}, 1);
  return add(with_class, positional_embedding_);
}

template <typename T>
Tensor<T> EAViTModel<T>::encoder_block(const Tensor<T>& tokens, std::size_t layer) const {
  const auto& b = blocks_.at(layer);
  if (tokens.dim(-1) != config_.projection_dim) {
    throw ShapeError("encoder block expects width " + std::to_string(config_.projection_dim) + ", got " +
                     tensor::to_string(tokens.shape()));
  }
  const Tensor<T> normed = layer_norm(tokens, b.attention_norm_gain, b.attention_norm_bias);
  const Tensor<T> attended =
      config_.attention == AttentionKind::kExternal
          ? multi_head_ea(normed, b.memory_key, b.memory_value, b.output_map, config_.heads)
          : self_attention(normed, b.query_map, b.key_map, b.value_map, b.output_map, config_.heads);
  const Tensor<T> mid = add(attended, tokens);
  const Tensor<T> hidden = gelu(add(matmul(layer_norm(mid, b.mlp_norm_gain, b.mlp_norm_bias), b.mlp_in_weight),
                                    b.mlp_in_bias));
  return add(add(matmul(hidden, b.mlp_out_weight), b.mlp_out_bias), mid);
}

template <typename T>
Tensor<T> EAViTModel<T>::forward(const Tensor<T>& patches) const {
  Tensor<T> z = embed(patches);
  for (std::size_t l = 0; l < blocks_.size(); ++l) z = encoder_block(z, l);
  const std::size_t batch = patches.dim(0);
  Tensor<T> y = layer_norm(reshape(slice_tokens(z, 0, 1), {batch, config_.projection_dim}), final_norm_gain_,
                           final_norm_bias_);
  for (std::size_t i = 0; i < head_.size(); ++i) {
    y = add(matmul(y, head_[i].weight), head_[i].bias);
    if (i + 1 < head_.size()) y = gelu(y);
  }
  return y;
}

template <typename T>
Tensor<T> EAViTModel<T>::forward(const dsp::MelImage& image) const {
  const dsp::MelImage* one[1] = {&image};
  const Tensor<T> logits = forward(patchify_batch<T>(one, config_));
  return reshape(logits, {config_.classes});
}

template <typename T>
Tensor<T> patchify(const dsp::MelImage& image, std::size_t patch_size) {
  if (patch_size == 0 || image.height % patch_size != 0 || image.width % patch_size != 0) {
    throw ShapeError("image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                     " not divisible into " + std::to_string(patch_size) + "-pixel patches");
  }
  const std::size_t rows = image.height / patch_size;
  const std::size_t cols = image.width / patch_size;
  const std::size_t c = image.channels;
  const std::size_t patch_dim = patch_size * patch_size * c;
  std::vector<T> values(rows * cols * patch_dim);
  for (std::size_t pr = 0; pr < rows; ++pr)
    for (std::size_t pc = 0; pc < cols; ++pc) {
      T* out = values.data() + (pr * cols + pc) * patch_dim;
      for (std::size_t y = 0; y < patch_size; ++y)
        for (std::size_t x = 0; x < patch_size; ++x)
          for (std::size_t ch = 0; ch < c; ++ch)
            out[(y * patch_size + x) * c + ch] =
                static_cast<T>(image.at(pr * patch_size + y, pc * patch_size + x, ch)) / T(255);
    }
  return Tensor<T>({rows * cols, patch_dim}, std::move(values));
}

template <typename T>
Tensor<T> patchify_batch(std::span<const dsp::MelImage* const> images, const ModelConfig& config) {
  if (images.empty()) throw ShapeError("empty image batch");
  std::vector<T> values;
  values.reserve(images.size() * config.num_patches() * config.patch_dim());
  for (const dsp::MelImage* img : images) {
    if (img->height != config.image_size || img->width != config.image_size || img->channels != config.channels) {
      throw ShapeError("image " + std::to_string(img->height) + "x" + std::to_string(img->width) + "x" +
                       std::to_string(img->channels) + " does not match model input " +
                       std::to_string(config.image_size) + "x" + std::to_string(config.image_size) + "x" +
                       std::to_string(config.channels));
    }
    const Tensor<T> p = patchify<T>(*img, config.patch_size);
    values.insert(values.end(), p.data().begin(), p.data().end());
  }
  return Tensor<T>({images.size(), config.num_patches(), config.patch_dim()}, std::move(values));
}

dsp::MelImage unpatchify(std::span<const double> patches, std::size_t height, std::size_t width,
                         std::size_t channels, std::size_t patch_size) {
  dsp::MelImage img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.resize(height * width * channels);
  const std::size_t cols = width / patch_size;
  const std::size_t patch_dim = patch_size * patch_size * channels;
  for (std::size_t p = 0; p < patches.size() / patch_dim; ++p) {
    const std::size_t pr = p / cols, pc = p % cols;
    for (std::size_t y = 0; y < patch_size; ++y)
      for (std::size_t x = 0; x < patch_size; ++x)
        for (std::size_t ch = 0; ch < channels; ++ch) {
          const double v = patches[p * patch_dim + (y * patch_size + x) * channels + ch];
          img.pixels[((pr * patch_size + y) * width + pc * patch_size + x) * channels + ch] =
              static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
  }
  return img;
}

template class EAViTModel<float>;
template class EAViTModel<double>;
template Tensor<float> patchify<float>(const dsp::MelImage&, std::size_t);
template Tensor<double> patchify<double>(const dsp::MelImage&, std::size_t);
template Tensor<float> patchify_batch<float>(std::span<const dsp::MelImage* const>, const ModelConfig&);
template Tensor<double> patchify_batch<double>(std::span<const dsp::MelImage* const>, const ModelConfig&);

}  // namespace eavit::model
