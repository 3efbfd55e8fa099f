#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "eavit/errors.h"
#include "eavit/train/checkpoint.h"
#include "eavit/train/config_file.h"
#include "eavit/train/dataset.h"
#include "eavit/train/optimizer.h"
#include "eavit/train/trainer.h"
#include "eavit/tensor/ops.h"

using namespace eavit;
using namespace eavit::train;
namespace fs = std::filesystem;
using tensor::Shape;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("eavit_train_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<dsp::ManifestRow> synthetic_manifest(std::size_t classes, std::size_t tracks, std::size_t segments) {
  std::vector<dsp::ManifestRow> rows;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t t = 0; t < tracks; ++t)
      for (std::size_t s = 0; s < segments; ++s) {
        const auto track = "g" + std::to_string(c) + "/t" + std::to_string(t);
        rows.push_back({track + "_" + std::to_string(s) + ".pgm", track, s, static_cast<int>(c)});
      }
  return rows;
}

RunConfig small_config() {
  RunConfig c;
  apply_setting(c, "image_size", "16");
  apply_setting(c, "patch_size", "8");
  apply_setting(c, "projection_dim", "8");
  apply_setting(c, "layers", "2");
  apply_setting(c, "heads", "2");
  apply_setting(c, "memory_size", "4");
  apply_setting(c, "head_hidden", "16");
  apply_setting(c, "batch_size", "8");
  apply_setting(c, "seed", "11");
  return c;
}

// Class c lights up a horizontal band whose position depends on c.
ImageSet pattern_images(std::size_t per_class, std::size_t classes, std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> noise(0, 60);
  ImageSet set;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t k = 0; k < per_class; ++k) {
      dsp::MelImage img;
      img.height = img.width = side;
      img.pixels.resize(side * side);
      for (std::size_t r = 0; r < side; ++r)
        for (std::size_t col = 0; col < side; ++col) {
          const bool band = r * classes / side == c;
          img.pixels[r * side + col] = static_cast<std::uint8_t>((band ? 180 : 0) + noise(rng));
        }
      img.label = static_cast<int>(c);
      set.images.push_back(img);
      set.labels.push_back(static_cast<int>(c));
      set.track_ids.push_back("t" + std::to_string(c) + "_" + std::to_string(k));
    }
  return set;
}

template <typename T>
std::vector<std::vector<T>> snapshot(const model::EAViTModel<T>& m) {
  std::vector<std::vector<T>> out;
  for (const auto& p : m.parameters()) out.emplace_back(p.value.data().begin(), p.value.data().end());
  return out;
}

std::vector<char> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(
      "# reduced run\n"
      "image_size = 64\n"
      "patch_size=16\n"
      "\n"
      "head_hidden=256,128\n"
      "learning_rate=0.0005  # slower\n"
      "split=segment\n"
      "attention=self\n");
  CHECK(c.model.image_size == 64);
  CHECK(c.preprocess.image_size == 64);
  CHECK(c.model.patch_size == 16);
  CHECK(c.model.head_hidden == std::vector<std::size_t>{256, 128});
  CHECK(c.train.learning_rate == 0.0005);
  CHECK(c.train.split == SplitStrategy::kSegment);
  CHECK(c.model.attention == model::AttentionKind::kSelf);
  CHECK_NOTHROW(c.validate());

  CHECK(parse_config(format_config(c)) == c);
  RunConfig defaults;
  CHECK(parse_config(format_config(defaults)) == defaults);
  CHECK(defaults.train.learning_rate == 0.001);
  CHECK(defaults.train.weight_decay == 0.0001);
  CHECK(defaults.train.batch_size == 256);
  CHECK(defaults.train.epochs == 100);
  CHECK(config_keys().size() == 29);

  RunConfig o = defaults;
  apply_override(o, "epochs=7");
  CHECK(o.train.epochs == 7);
  apply_setting(o, "class_names", "a,b,c");
  CHECK(o.model.classes == 3);

  CHECK_THROWS_AS(parse_config("colour=blue\n"), UsageError);
  CHECK_THROWS_AS(parse_config("epochs\n"), UsageError);
  CHECK_THROWS_AS(parse_config("epochs=ten\n"), UsageError);
  CHECK_THROWS_AS(parse_config("epochs=-3\n"), UsageError);
  CHECK_THROWS_AS(parse_config("learning_rate=nan\n"), UsageError);
  CHECK_THROWS_AS(apply_override(o, "epochs"), UsageError);
  CHECK_THROWS_AS(parse_config("epochs=0\n").validate(), UsageError);
  CHECK_THROWS_AS(parse_config("precision=16\n").validate(), UsageError);
  CHECK_THROWS_AS(parse_config("split_ratios=0.5,0.1,0.1\n").validate(), UsageError);
  CHECK_THROWS_AS(parse_config("patch_size=60\n").validate(), UsageError);
  CHECK_THROWS_AS(load_config("/nonexistent/eavit.cfg"), UsageError);
  try {
    parse_config("epochs=3\nbogus=1\n");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("split_dataset") {
  const auto manifest = synthetic_manifest(10, 100, 10);
  SUBCASE("track strategy") {
    const auto index = split_dataset(manifest, SplitStrategy::kTrack, {}, 5, 10);
    std::map<Split, std::set<std::string>> tracks;
    for (std::size_t i = 0; i < index.entries.size(); ++i) tracks[index.assignment[i]].insert(index.entries[i].track_id);
    CHECK(tracks[Split::kTrain].size() == 800);
    CHECK(tracks[Split::kValidation].size() == 100);
    CHECK(tracks[Split::kTest].size() == 100);
    CHECK(index.indices(Split::kTrain).size() == 8000);
    CHECK(index.indices(Split::kValidation).size() == 1000);
    CHECK(index.indices(Split::kTest).size() == 1000);
    std::size_t shared = 0;
    for (const auto& t : tracks[Split::kTrain]) shared += tracks[Split::kValidation].count(t) + tracks[Split::kTest].count(t);
    for (const auto& t : tracks[Split::kValidation]) shared += tracks[Split::kTest].count(t);
    CHECK(shared == 0);
    // Stratified: every genre contributes 80/10/10 tracks.
    for (int c = 0; c < 10; ++c) {
      std::map<Split, std::set<std::string>> per;
      for (std::size_t i = 0; i < index.entries.size(); ++i)
        if (index.entries[i].label == c) per[index.assignment[i]].insert(index.entries[i].track_id);
      CHECK(per[Split::kTrain].size() == 80);
      CHECK(per[Split::kValidation].size() == 10);
    }
    const auto again = split_dataset(manifest, SplitStrategy::kTrack, {}, 5, 10);
    CHECK(again.assignment == index.assignment);
    CHECK(split_dataset(manifest, SplitStrategy::kTrack, {}, 6, 10).assignment != index.assignment);
  }
  SUBCASE("segment strategy") {
    const auto index = split_dataset(manifest, SplitStrategy::kSegment, {}, 5, 10);
    CHECK(index.indices(Split::kTrain).size() == 8000);
    CHECK(index.indices(Split::kValidation).size() == 1000);
    CHECK(index.indices(Split::kTest).size() == 1000);
    std::set<std::string> train_tracks, test_tracks;
    for (std::size_t i : index.indices(Split::kTrain)) train_tracks.insert(index.entries[i].track_id);
    for (std::size_t i : index.indices(Split::kTest)) test_tracks.insert(index.entries[i].track_id);
    std::size_t leaked = 0;
    for (const auto& t : test_tracks) leaked += train_tracks.count(t);
    CHECK(leaked > 0);
  }
  SUBCASE("uneven class sizes stay within one track of the ratio") {
    auto rows = synthetic_manifest(3, 7, 2);
    const auto index = split_dataset(rows, SplitStrategy::kTrack, {0.6, 0.2, 0.2}, 1, 3);
    for (int c = 0; c < 3; ++c) {
      std::size_t train = 0;
      for (std::size_t i : index.indices(Split::kTrain)) train += index.entries[i].label == c;
      CHECK(std::abs(static_cast<double>(train / 2) - 0.6 * 7) <= 1.0);
    }
  }
  CHECK_THROWS_AS(split_dataset({}, SplitStrategy::kTrack, {}, 0, 10), DataError);
  CHECK_THROWS_AS(split_dataset(synthetic_manifest(9, 10, 1), SplitStrategy::kTrack, {}, 0, 10), DataError);
  CHECK_THROWS_AS(split_dataset(manifest, SplitStrategy::kTrack, {0.5, 0.3, 0.3}, 0, 10), UsageError);
  CHECK_THROWS_AS(split_dataset(manifest, SplitStrategy::kTrack, {1.2, -0.1, -0.1}, 0, 10), UsageError);
  CHECK_THROWS_AS(split_dataset(manifest, SplitStrategy::kTrack, {}, 0, 5), DataError);
}

TEST_CASE("optimizer_step") {
  SUBCASE("zero gradient without decay leaves parameters unchanged") {
    Tensor<double> p(Shape{4}, std::vector<double>{1, -2, 3, 0.5});
    OptimizerState<double> state;
    for (int i = 0; i < 3; ++i) optimizer_step<double>({p}, state, 1e-3, 0.0);
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == -2.0);
    CHECK(state.step == 3);
  }
  SUBCASE("zero gradient with decay shrinks geometrically") {
    Tensor<double> p(Shape{3}, std::vector<double>{1, -2, 4});
    OptimizerState<double> state;
    const double lr = 1e-2, wd = 0.5;
    for (int step = 1; step <= 10; ++step) {
      optimizer_step<double>({p}, state, lr, wd);
      CHECK(p.data()[2] == doctest::Approx(4 * std::pow(1 - lr * wd, step)).epsilon(1e-14));
    }
  }
  SUBCASE("constant gradient moves every step by the learning rate") {
    // m_hat = g and v_hat = g^2 at every t when g is constant.
    Tensor<double> p = Tensor<double>::scalar(0.0);
    p.set_requires_grad(true);
    OptimizerState<double> state;
    for (int step = 1; step <= 5; ++step) {
      tensor::Tape<double> tape;
      tensor::backward(tensor::mul_scalar(p, 3.0));
      optimizer_step<double>({p}, state, 0.01, 0.0);
      p.zero_grad();
      CHECK(p.item() == doctest::Approx(-0.01 * step * 3.0 / (3.0 + 1e-8)).epsilon(1e-12));
    }
    CHECK(state.first_moment[0][0] == doctest::Approx(3.0 * (1 - std::pow(0.9, 5))));
  }
  SUBCASE("buffer mismatch") {
    Tensor<double> a(Shape{2}, 1.0), b(Shape{3}, 1.0);
    OptimizerState<double> state;
    optimizer_step<double>({a}, state, 1e-3, 0.0);
    CHECK_THROWS_AS(optimizer_step<double>({b}, state, 1e-3, 0.0), ShapeError);
    CHECK_THROWS_AS(optimizer_step<double>({a, b}, state, 1e-3, 0.0), ShapeError);
  }
}

TEST_CASE("train_epoch") {
  auto config = small_config();
  apply_setting(config, "projection_dim", "32");
  apply_setting(config, "head_hidden", "2048,1024");
  const auto data = pattern_images(4, 10, 16, 3);
  SUBCASE("zero learning rate and decay leave the model untouched") {
    config.train.learning_rate = 0;
    config.train.weight_decay = 0;
    TrainingState<float> state(config);
    const auto before = snapshot(state.model);
    train_epoch(state, data, config.train);
    CHECK(snapshot(state.model) == before);
  }
  SUBCASE("untrained loss is near ln 10") {
    TrainingState<float> state(config);
    const auto first = evaluate(state.model, data, 8);
    CHECK(std::abs(first.loss - std::log(10.0)) < 0.3);
  }
  SUBCASE("training reduces the loss") {
    TrainingState<float> state(config);
    const double start = evaluate(state.model, data, 8).loss;
    for (int e = 0; e < 40; ++e) train_epoch(state, data, config.train);
    const auto after = evaluate(state.model, data, 8);
    CHECK(after.loss < 0.5 * start);
    CHECK(after.accuracy >= 0.8);
  }
  SUBCASE("non-finite loss aborts") {
    TrainingState<float> state(config);
    state.model.class_token().data()[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(train_epoch(state, data, config.train), NumericError);
  }
  SUBCASE("probabilities are normalised") {
    TrainingState<float> state(config);
    for (const auto& row : predict_probabilities(state.model, data, 7)) {
      double total = 0;
      for (double p : row) total += p;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
    }
  }
  CHECK_THROWS_AS(TrainingState<float>(config).model.forward(pattern_images(1, 1, 32, 0).images[0]), ShapeError);
}

TEST_CASE("log_history") {
  const auto dir = scratch("history");
  History h;
  for (std::size_t e = 1; e <= 100; ++e) h.push_back({e, 2.0 / e, 0.5, 2.5 / e, 0.25});
  log_history(h, dir / "history.csv");
  std::ifstream in(dir / "history.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,train_loss,train_acc,val_loss,val_acc");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) rows += !line.empty();
  CHECK(rows == 100);
  const auto back = read_history(dir / "history.csv");
  REQUIRE(back.size() == 100);
  CHECK(back[9].train_loss == doctest::Approx(0.2));
  CHECK_THROWS_AS(log_history({}, dir / "empty.csv"), DataError);
  CHECK_THROWS_AS(log_history(h, dir / "missing" / "history.csv"), DataError);
}

TEST_CASE("checkpoint round trip and resume") {
  const auto dir = scratch("checkpoint");
  auto config = small_config();
  apply_setting(config, "class_names", "a,b,c");
  config.train.epochs = 4;
  const auto data = pattern_images(5, 3, 16, 4);
  const auto val = pattern_images(2, 3, 16, 5);

  TrainingState<float> full(config);
  fit(full, data, val, config);

  RunConfig half = config;
  half.train.epochs = 2;
  TrainingState<float> first(config);
  fit(first, data, val, half);
  save_checkpoint(dir / "ck.bin", config, first);

  auto loaded = load_checkpoint<float>(dir / "ck.bin");
  CHECK(loaded.config == config);
  CHECK(snapshot(loaded.state.model) == snapshot(first.model));
  CHECK(loaded.state.optimizer == first.optimizer);
  CHECK(loaded.state.epoch == 2);
  CHECK(loaded.state.rng == first.rng);
  CHECK(loaded.state.history.size() == 2);

  fit(loaded.state, data, val, config);
  CHECK(snapshot(loaded.state.model) == snapshot(full.model));
  CHECK(loaded.state.history == full.history);

  save_checkpoint(dir / "a.bin", config, full);
  save_checkpoint(dir / "b.bin", config, loaded.state);
  CHECK(file_bytes(dir / "a.bin") == file_bytes(dir / "b.bin"));
  CHECK(checkpoint_config(dir / "a.bin") == config);

  SUBCASE("corruption is detected") {
    auto bytes = file_bytes(dir / "a.bin");
    {
      std::ofstream out(dir / "trunc.bin", std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint<float>(dir / "trunc.bin"), doctest::Contains("checksum"), DataError);
    bytes[bytes.size() / 3] ^= 0x10;
    {
      std::ofstream out(dir / "flip.bin", std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint<float>(dir / "flip.bin"), doctest::Contains("checksum"), DataError);
    {
      std::ofstream out(dir / "junk.bin", std::ios::binary);
      out << "not a checkpoint";
    }
    CHECK_THROWS_WITH_AS(load_checkpoint<float>(dir / "junk.bin"), doctest::Contains("magic"), DataError);
    CHECK_THROWS_AS(load_checkpoint<float>(dir / "absent.bin"), DataError);
  }
  SUBCASE("precision must match") {
    CHECK_THROWS_WITH_AS(load_checkpoint<double>(dir / "a.bin"), doctest::Contains("32-bit"), DataError);
  }
}

TEST_CASE("load_images") {
  const auto dir = scratch("images");
  auto set = pattern_images(1, 2, 16, 6);
  fs::create_directories(dir / "g0");
  dsp::write_pnm(dir / "g0" / "a.pgm", set.images[0]);
  dsp::write_pnm(dir / "g0" / "b.pgm", set.images[1]);
  auto index = train_only({{"g0/a.pgm", "g0/a", 0, 0}, {"g0/b.pgm", "g0/b", 0, 1}, {"g0/c.pgm", "g0/c", 0, 1}});
  const auto loaded = load_images(index, {0, 1}, dir, 16, 1);
  CHECK(loaded.images[1].pixels == set.images[1].pixels);
  CHECK(loaded.labels == std::vector<int>{0, 1});
  CHECK_THROWS_AS(load_images(index, {2}, dir, 16, 1), DataError);
  CHECK_THROWS_AS(load_images(index, {0}, dir, 32, 1), DataError);

  write_split(dir / "split.csv", index);
  std::ifstream in(dir / "split.csv");
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "path,track_id,segment_index,label,split");
  CHECK(first == "g0/a.pgm,g0/a,0,0,train");
}
