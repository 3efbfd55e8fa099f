#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "eavit/dsp/preprocess.h"
#include "eavit/model/config.h"

namespace eavit::train {

enum class SplitStrategy { kTrack, kSegment };

std::string to_string(SplitStrategy strategy);
SplitStrategy parse_split_strategy(const std::string& text);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;

  bool operator==(const SplitRatios&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  std::size_t batch_size = 256;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  int precision = 32;  // 32 or 64 bit parameters
  bool reproducible = false;
  SplitStrategy split = SplitStrategy::kTrack;
  SplitRatios ratios;
  bool track_vote = false;  // evaluation: majority vote per track

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Everything a run needs. image_size, channels and the class list are
// shared between preprocessing and the model; apply_setting keeps them in
// step.
struct RunConfig {
  dsp::PreprocessConfig preprocess;
  model::ModelConfig model;
  TrainConfig train;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Recognised keys, in the order format_config writes them.
const std::vector<std::string>& config_keys();

// Throws UsageError for an unknown key or an unparsable value.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// "key=value"; throws UsageError without '='.
void apply_override(RunConfig& config, const std::string& assignment);

// Flat UTF-8 key=value lines; '#' starts a comment, blank lines ignored.
// Later lines override earlier ones. Does not validate the result.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

// Canonical text form; parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& config);

}  // namespace eavit::train
