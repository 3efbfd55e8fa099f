#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "eavit/dsp/image.h"
#include "eavit/dsp/preprocess.h"
#include "eavit/train/config_file.h"

namespace eavit::train {

enum class Split : std::uint8_t { kTrain, kValidation, kTest };

std::string to_string(Split split);

struct DatasetIndex {
  std::vector<dsp::ManifestRow> entries;
  std::vector<Split> assignment;  // parallel to entries
  SplitStrategy strategy = SplitStrategy::kTrack;
  std::uint64_t seed = 0;

  // Entry positions in manifest order.
  std::vector<std::size_t> indices(Split split) const;
};

// Stratified by label: within each class the units (tracks, or single
// segments) are shuffled with the seed and cut into round(n * train),
// round(n * validation) and the remainder. Throws DataError for an empty
// manifest, a label outside [0, classes) or a class with no entries, and
// UsageError for ratios that are negative or do not sum to one.
DatasetIndex split_dataset(std::vector<dsp::ManifestRow> manifest, SplitStrategy strategy, SplitRatios ratios,
                           std::uint64_t seed, std::size_t classes);

// Every entry in the training split; for overfitting runs on tiny sets.
DatasetIndex train_only(std::vector<dsp::ManifestRow> manifest);

// Writes path,track_id,segment_index,label,split.
void write_split(const std::filesystem::path& path, const DatasetIndex& index);

struct ImageSet {
  std::vector<dsp::MelImage> images;
  std::vector<int> labels;
  std::vector<std::string> track_ids;

  std::size_t size() const { return images.size(); }
};

// Reads the images of the given entries (paths relative to root). Throws
// DataError for unreadable files or images whose size or channel count do
// not match.
ImageSet load_images(const DatasetIndex& index, const std::vector<std::size_t>& which,
                     const std::filesystem::path& root, std::size_t image_size, std::size_t channels);

// Fisher-Yates with the engine's raw output, so orders do not depend on the
// standard library's distribution implementations.
void shuffle(std::vector<std::size_t>& items, std::mt19937_64& rng);

}  // namespace eavit::train
