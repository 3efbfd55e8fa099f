#include "eavit/train/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "eavit/errors.h"
#include "eavit/tensor/ops.h"

namespace eavit::train {
namespace {

constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ull;

template <typename T>
std::vector<Tensor<T>> parameter_tensors(const model::EAViTModel<T>& model) {
  std::vector<Tensor<T>> out;
  for (const auto& p : model.parameters()) out.push_back(p.value);
  return out;
}

template <typename T>
Tensor<T> batch_patches(const ImageSet& set, std::span<const std::size_t> rows, const model::ModelConfig& config) {
  std::vector<const dsp::MelImage*> images;
  images.reserve(rows.size());
  for (std::size_t r : rows) images.push_back(&set.images[r]);
  return model::patchify_batch<T>(images, config);
}

template <typename T>
std::size_t count_correct(const Tensor<T>& logits, std::span<const int> labels) {
  const std::size_t classes = logits.shape().back();
  std::size_t correct = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    auto row = logits.data().subspan(b * classes, classes);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += best == labels[b];
  }
  return correct;
}

}  // namespace

template <typename T>
TrainingState<T>::TrainingState(const RunConfig& config)
    : model(config.model, config.train.seed), rng(config.train.seed ^ kShuffleStream) {}

template <typename T>
LossAccuracy train_epoch(TrainingState<T>& state, const ImageSet& train, const TrainConfig& config) {
  if (train.size() == 0) throw DataError("training set is empty");
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, state.rng);

  const auto params = parameter_tensors(state.model);
  double loss_sum = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    const std::size_t count = std::min(config.batch_size, order.size() - start);
    const std::span<const std::size_t> rows(order.data() + start, count);
    std::vector<int> labels;
    for (std::size_t r : rows) labels.push_back(train.labels[r]);
    auto patches = batch_patches<T>(train, rows, state.model.config());

    for (auto p : params) p.zero_grad();
    tensor::Tape<T> tape;
    auto logits = state.model.forward(patches);
    auto loss = tensor::cross_entropy(logits, std::span<const int>(labels));
    const double value = static_cast<double>(loss.item());
    if (!std::isfinite(value)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(state.epoch + 1) + ", batch " +
                         std::to_string(start / config.batch_size) + " (learning_rate " +
                         std::to_string(config.learning_rate) + ")");
    }
    tensor::backward(loss);
    optimizer_step(params, state.optimizer, config.learning_rate, config.weight_decay);
    loss_sum += value * static_cast<double>(count);
    correct += count_correct(logits, labels);
  }
  for (auto p : params) p.zero_grad();
  return {loss_sum / static_cast<double>(train.size()),
          static_cast<double>(correct) / static_cast<double>(train.size())};
}

template <typename T>
std::vector<std::vector<double>> predict_probabilities(const model::EAViTModel<T>& model, const ImageSet& images,
                                                       std::size_t batch_size) {
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> rows(images.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, rows.size() - start);
    auto logits = model.forward(batch_patches<T>(images, {rows.data() + start, count}, model.config()));
    auto probs = tensor::softmax_axis(logits, -1);
    const std::size_t classes = probs.shape().back();
    for (std::size_t b = 0; b < count; ++b) {
      auto row = probs.data().subspan(b * classes, classes);
      out.emplace_back(row.begin(), row.end());
    }
  }
  return out;
}

template <typename T>
LossAccuracy evaluate(const model::EAViTModel<T>& model, const ImageSet& images, std::size_t batch_size) {
  if (images.size() == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  std::vector<std::size_t> rows(images.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  double loss_sum = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, rows.size() - start);
    const std::span<const int> labels(images.labels.data() + start, count);
    auto logits = model.forward(batch_patches<T>(images, {rows.data() + start, count}, model.config()));
    loss_sum += static_cast<double>(tensor::cross_entropy(logits, labels).item()) * static_cast<double>(count);
    correct += count_correct(logits, labels);
  }
  return {loss_sum / static_cast<double>(images.size()),
          static_cast<double>(correct) / static_cast<double>(images.size())};
}

template <typename T>
void fit(TrainingState<T>& state, const ImageSet& train, const ImageSet& validation, const RunConfig& config,
         const std::function<void(const TrainingState<T>&)>& on_epoch) {
  while (state.epoch < config.train.epochs) {
    const auto trained = train_epoch(state, train, config.train);
    const auto held_out = evaluate(state.model, validation, config.train.batch_size);
    ++state.epoch;
    state.history.push_back({state.epoch, trained.loss, trained.accuracy, held_out.loss, held_out.accuracy});
    if (on_epoch) on_epoch(state);
  }
}

void log_history(const History& history, const std::filesystem::path& path) {
  if (history.empty()) throw DataError("history is empty");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << kHistoryHeader << '\n';
  char line[160];
  for (const auto& e : history) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.train_acc, e.val_loss,
                  e.val_acc);
    out << line;
  }
  if (!out) throw DataError("failed writing " + path.string());
}

History read_history(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) throw DataError(path.string() + ": bad history header");
  History history;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochStats e;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf", &e.epoch, &e.train_loss, &e.train_acc, &e.val_loss,
                    &e.val_acc) != 5) {
      throw DataError(path.string() + ": malformed row '" + line + "'");
    }
    history.push_back(e);
  }
  return history;
}

template struct TrainingState<float>;
template struct TrainingState<double>;
template LossAccuracy train_epoch<float>(TrainingState<float>&, const ImageSet&, const TrainConfig&);
template LossAccuracy train_epoch<double>(TrainingState<double>&, const ImageSet&, const TrainConfig&);
template std::vector<std::vector<double>> predict_probabilities<float>(const model::EAViTModel<float>&,
                                                                       const ImageSet&, std::size_t);
template std::vector<std::vector<double>> predict_probabilities<double>(const model::EAViTModel<double>&,
                                                                        const ImageSet&, std::size_t);
template LossAccuracy evaluate<float>(const model::EAViTModel<float>&, const ImageSet&, std::size_t);
template LossAccuracy evaluate<double>(const model::EAViTModel<double>&, const ImageSet&, std::size_t);
template void fit<float>(TrainingState<float>&, const ImageSet&, const ImageSet&, const RunConfig&,
                         const std::function<void(const TrainingState<float>&)>&);
template void fit<double>(TrainingState<double>&, const ImageSet&, const ImageSet&, const RunConfig&,
                          const std::function<void(const TrainingState<double>&)>&);

}  // namespace eavit::train
