#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "eavit/model/eavit.h"
#include "eavit/train/config_file.h"
#include "eavit/train/dataset.h"
#include "eavit/train/optimizer.h"

namespace eavit::train {

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;  // NaN without a validation set
  double val_acc = 0;

  bool operator==(const EpochStats&) const = default;
};

using History = std::vector<EpochStats>;

// Everything that evolves during training; a checkpoint is exactly this plus
// the run configuration.
template <typename T>
struct TrainingState {
  model::EAViTModel<T> model;
  OptimizerState<T> optimizer;
  std::size_t epoch = 0;  // completed epochs
  std::mt19937_64 rng;    // batch shuffling
  History history;

  // Fresh model and optimizer for the config and its seed.
  explicit TrainingState(const RunConfig& config);
};

struct LossAccuracy {
  double loss = 0;
  double accuracy = 0;
};

// One pass over the training images in seeded shuffled mini-batches:
// forward, mean cross-entropy, backward, optimizer step. Returns mean loss
// and accuracy over the epoch. Throws NumericError on a non-finite loss.
template <typename T>
LossAccuracy train_epoch(TrainingState<T>& state, const ImageSet& train, const TrainConfig& config);

// Class probabilities for every image, batched, without recording a tape.
template <typename T>
std::vector<std::vector<double>> predict_probabilities(const model::EAViTModel<T>& model, const ImageSet& images,
                                                       std::size_t batch_size);

template <typename T>
LossAccuracy evaluate(const model::EAViTModel<T>& model, const ImageSet& images, std::size_t batch_size);

// Runs epochs until state.epoch == config.train.epochs, appending to the
// history and calling on_epoch after each one (e.g. to checkpoint).
template <typename T>
void fit(TrainingState<T>& state, const ImageSet& train, const ImageSet& validation, const RunConfig& config,
         const std::function<void(const TrainingState<T>&)>& on_epoch = {});

inline constexpr const char* kHistoryHeader = "epoch,train_loss,train_acc,val_loss,val_acc";

// Throws DataError for an empty history or an unwritable path.
void log_history(const History& history, const std::filesystem::path& path);
History read_history(const std::filesystem::path& path);

}  // namespace eavit::train
