#include "eavit/train/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

#include "eavit/errors.h"
#include "eavit/tensor/parallel.h"

namespace eavit::train {

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::vector<std::size_t> DatasetIndex::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == split) out.push_back(i);
  return out;
}

void shuffle(std::vector<std::size_t>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[rng() % i]);
  }
}

DatasetIndex split_dataset(std::vector<dsp::ManifestRow> manifest, SplitStrategy strategy, SplitRatios ratios,
                           std::uint64_t seed, std::size_t classes) {
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw UsageError("split ratios must be non-negative and sum to 1");
  }
  if (manifest.empty()) throw DataError("manifest is empty");

  // Units per class, in sorted order so the result does not depend on
  // manifest row order.
  std::vector<std::map<std::string, std::vector<std::size_t>>> units(classes);
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& row = manifest[i];
    if (row.label < 0 || static_cast<std::size_t>(row.label) >= classes) {
      throw DataError("label " + std::to_string(row.label) + " out of range for " + row.path);
    }
    std::string key = row.track_id;
    if (strategy == SplitStrategy::kSegment) {
      char suffix[24];
      std::snprintf(suffix, sizeof suffix, "#%08zu", row.segment_index);
      key += suffix;
    }
    units[row.label][key].push_back(i);
  }

  DatasetIndex index;
  index.strategy = strategy;
  index.seed = seed;
  index.assignment.assign(manifest.size(), Split::kTrain);
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < classes; ++c) {
    if (units[c].empty()) throw DataError("class " + std::to_string(c) + " has no entries");
    std::vector<const std::vector<std::size_t>*> groups;
    for (const auto& [key, rows] : units[c]) groups.push_back(&rows);
    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    const auto n = static_cast<double>(groups.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * ratios.train));
    const auto n_val = std::min(groups.size() - n_train, static_cast<std::size_t>(std::llround(n * ratios.validation)));
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Split split = k < n_train ? Split::kTrain : k < n_train + n_val ? Split::kValidation : Split::kTest;
      for (std::size_t row : *groups[order[k]]) index.assignment[row] = split;
    }
  }
  index.entries = std::move(manifest);
  return index;
}

DatasetIndex train_only(std::vector<dsp::ManifestRow> manifest) {
  if (manifest.empty()) throw DataError("manifest is empty");
  DatasetIndex index;
  index.assignment.assign(manifest.size(), Split::kTrain);
  index.entries = std::move(manifest);
  return index;
}

void write_split(const std::filesystem::path& path, const DatasetIndex& index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "path,track_id,segment_index,label,split\n";
  for (std::size_t i = 0; i < index.entries.size(); ++i) {
    const auto& e = index.entries[i];
    out << e.path << ',' << e.track_id << ',' << e.segment_index << ',' << e.label << ','
        << to_string(index.assignment[i]) << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

ImageSet load_images(const DatasetIndex& index, const std::vector<std::size_t>& which,
                     const std::filesystem::path& root, std::size_t image_size, std::size_t channels) {
  ImageSet set;
  set.images.resize(which.size());
  std::mutex error_mutex;
  std::string error;
  tensor::parallel_rows(which.size(), image_size * image_size * 64, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& entry = index.entries.at(which[i]);
      try {
        auto image = dsp::read_pnm(root / entry.path);
        if (image.height != image_size || image.width != image_size || image.channels != channels) {
          throw DataError(entry.path + ": expected " + std::to_string(image_size) + "x" +
                          std::to_string(image_size) + "x" + std::to_string(channels) + " image, got " +
                          std::to_string(image.height) + "x" + std::to_string(image.width) + "x" +
                          std::to_string(image.channels));
        }
        image.label = entry.label;
        image.track_id = entry.track_id;
        set.images[i] = std::move(image);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (error.empty()) error = e.what();
      }
    }
  });
  if (!error.empty()) throw DataError(error);
  for (std::size_t i : which) {
    set.labels.push_back(index.entries[i].label);
    set.track_ids.push_back(index.entries[i].track_id);
  }
  return set;
}

}  // namespace eavit::train
