// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. Training criteria use the synthetic corpus
// unless EAVIT_GTZAN_ROOT names a GTZAN-layout directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eavit/cli/cli.h"
#include "eavit/dsp/preprocess.h"
#include "eavit/dsp/spectrogram.h"
#include "eavit/dsp/synthetic.h"
#include "eavit/eval/metrics.h"
#include "eavit/model/attention.h"
#include "eavit/model/eavit.h"
#include "eavit/tensor/grad_check.h"
#include "eavit/tensor/ops.h"
#include "eavit/train/dataset.h"
#include "eavit/train/trainer.h"
#include "oracles.h"

namespace fs = std::filesystem;
using namespace eavit;
using tensor::Shape;
using tensor::Tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<T> values(tensor::numel(shape));
  for (auto& v : values) v = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(values));
}

std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); }

fs::path work_dir() {
  const char* env = std::getenv("EAVIT_ACCEPTANCE_DIR");
  return env ? fs::path(env) : fs::temp_directory_path() / "eavit_acceptance";
}

const char* gtzan_root() { return std::getenv("EAVIT_GTZAN_ROOT"); }

std::string corpus_name() { return gtzan_root() ? "GTZAN subset" : "synthetic corpus"; }

// First `tracks` files of each listed genre, either linked from GTZAN or
// synthesised.
fs::path make_corpus(const std::string& name, const std::vector<std::string>& genres, std::size_t tracks,
                     double seconds) {
  const auto root = work_dir() / name;
  fs::remove_all(root);
  if (const char* gtzan = gtzan_root()) {
    for (const auto& genre : genres) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(fs::path(gtzan) / genre))
        if (e.path().extension() == ".wav") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      fs::create_directories(root / genre);
      for (std::size_t i = 0; i < std::min(tracks, files.size()); ++i)
        fs::create_symlink(fs::absolute(files[i]), root / genre / files[i].filename());
    }
    return root;
  }
  dsp::SyntheticCorpusOptions options;
  options.tracks_per_genre = tracks;
  options.seconds = seconds;
  options.genres = genres;
  dsp::write_synthetic_corpus(root, options);
  return root;
}

int cli_run(const std::vector<std::string>& args, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (out_text) *out_text = out.str();
  if (code != cli::kOk) std::cerr << err.str();
  return code;
}

// Reduced desk-scale configuration.
const std::vector<std::string> kReduced = {
    "image_size=64", "patch_size=16", "projection_dim=32", "layers=4", "heads=8", "memory_size=64",
    "memory_init_std=1", "head_hidden=256,128", "batch_size=32", "learning_rate=1e-3"};

std::vector<std::string> with_settings(std::vector<std::string> args, const std::vector<std::string>& settings) {
  for (const auto& s : settings) {
    args.push_back("--set");
    args.push_back(s);
  }
  return args;
}

Outcome gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  model::ModelConfig c;
  c.image_size = 16;
  c.patch_size = 8;
  c.projection_dim = 8;
  c.layers = 2;
  c.heads = 2;
  c.memory_size = 3;
  c.head_hidden = {16};
  c.classes = 3;
  model::EAViTModel<double> m(c, 1);  // default init: zero class token and positions
  std::mt19937_64 rng(101);
  const auto patches = random_tensor<double>({2, 4, 64}, rng, 0.5);
  const std::vector<int> labels{1, 2};
  std::vector<Tensor<double>> params;
  for (const auto& p : m.parameters()) params.push_back(p.value);
  const auto r = tensor::grad_check_params<double>(
      [&] { return tensor::cross_entropy(m.forward(patches), labels); }, params, 1e-5, 1e-8, true);
  const double elapsed = seconds_since(start);
  return {r.max_relative_error < 1e-5 && elapsed < 60,
          format("five-point central differences, h=1e-5: worst tensor relative error %.2e over %zu tensors "
                 "(limit 1e-5), %.1f s (limit 60 s)",
                 r.max_relative_error, params.size(), elapsed)};
}

template <typename T>
double worst_row_error(std::mt19937_64& rng, std::size_t trials, std::size_t* negatives) {
  double worst = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t b = pick(rng, 1, 3), n = pick(rng, 1, 40), d = pick(rng, 1, 16), s = pick(rng, 1, 64);
    const double scale = std::pow(10.0, -3.0 + 6.0 * double(rng() % 1000001) / 1e6);
    const auto a = model::external_attention_map(random_tensor<T>({b, n, d}, rng, scale),
                                                 random_tensor<T>({s, d}, rng, 1.0));
    for (std::size_t row = 0; row < b * n; ++row) {
      double total = 0;
      for (std::size_t m = 0; m < s; ++m) {
        const double v = a.data()[row * s + m];
        if (!(v >= 0)) ++*negatives;
        total += v;
      }
      worst = std::max(worst, std::abs(total - 1.0));
    }
  }
  return worst;
}

Outcome double_normalization() {
  std::mt19937_64 rng(102);
  std::size_t neg64 = 0, neg32 = 0;
  const double w64 = worst_row_error<double>(rng, 1000, &neg64);
  const double w32 = worst_row_error<float>(rng, 1000, &neg32);
  return {w64 < 1e-6 && w32 < 1e-6 && neg64 == 0 && neg32 == 0,
          format("1000 inputs per precision, scales 1e-3..1e3: worst |row sum - 1| %.1e (64-bit), %.1e (32-bit); "
                 "negative or NaN entries %zu",
                 w64, w32, neg64 + neg32)};
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(103);
  double ea = 0, sa = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = pick(rng, 1, 9), d = pick(rng, 1, 8), s = pick(rng, 1, 9);
    const auto f = random_tensor<double>({n, d}, rng, 2.0);
    const auto mk = random_tensor<double>({s, d}, rng), mv = random_tensor<double>({s, d}, rng);
    ea = std::max(ea, max_abs_diff(values(model::external_attention(f, mk, mv)),
                                   oracle::loop_external_attention(values(f), n, d, values(mk), values(mv), s)));

    const std::size_t heads = pick(rng, 1, 3), dim = heads * pick(rng, 1, 3);
    const auto x = random_tensor<double>({n, dim}, rng);
    const auto wq = random_tensor<double>({dim, dim}, rng), wk = random_tensor<double>({dim, dim}, rng);
    const auto wv = random_tensor<double>({dim, dim}, rng), wo = random_tensor<double>({dim, dim}, rng);
    sa = std::max(sa, max_abs_diff(values(model::self_attention(x, wq, wk, wv, wo, heads)),
                                   oracle::loop_self_attention(values(x), n, dim, values(wq), values(wk),
                                                               values(wv), values(wo), heads)));
  }
  return {ea < 1e-6 && sa < 1e-6,
          format("200 random shapes: external %.1e, self %.1e max abs difference (limit 1e-6)", ea, sa)};
}

Outcome permutation_property() {
  model::ModelConfig c;  // 256x256 input, 16 patches, 16 layers
  c.memory_init_std = 1.0;
  model::EAViTModel<float> m(c, 4);
  auto& pos = m.positional_embedding();
  std::fill(pos.data().begin(), pos.data().end(), 0.0f);
  std::mt19937_64 rng(104);
  const std::size_t batch = 4, n = c.num_patches(), pd = c.patch_dim();
  const auto patches = random_tensor<float>({batch, n, pd}, rng, 0.5);
  double worst = 0, spread = 0;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor<float> shuffled(Shape{batch, n, pd});
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < n; ++i)
        std::copy_n(patches.data().begin() + (b * n + perm[i]) * pd, pd, shuffled.data().begin() + (b * n + i) * pd);
    const auto a = m.forward(patches), z = m.forward(shuffled);
    for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, double(std::abs(a.data()[i] - z.data()[i])));
    if (trial == 0) {
      const std::size_t k = c.classes;
      for (std::size_t i = 0; i < k; ++i) spread = std::max(spread, double(std::abs(a.data()[i] - a.data()[k + i])));
    }
  }
  return {worst < 1e-5, format("5 permutations x %zu images: max logit change %.1e (limit 1e-5); logits of two "
                               "different inputs differ by up to %.1e",
                               batch, worst, spread)};
}

Outcome complexity() {
  cli::BenchOptions options;
  const auto rows = cli::bench_attention(options);
  auto ratio = [&](const std::string& kind) {
    double lo = 0, hi = 0;
    for (const auto& r : rows) {
      if (r.kind != kind) continue;
      if (r.tokens == 128) lo = r.median_ms;
      if (r.tokens == 512) hi = r.median_ms;
    }
    return hi / lo;
  };
  const double ea = ratio("external"), sa = ratio("self");
  return {ea <= 6 && sa >= 10,
          format("median time N=512 / N=128: external %.2f (limit <= 6), self %.2f (limit >= 10)", ea, sa)};
}

Outcome overfit_smoke() {
  const auto start = std::chrono::steady_clock::now();
  auto genres = dsp::default_class_names();
  genres.resize(8);
  const auto corpus = make_corpus("overfit_wav", genres, 1, 30.0);
  const auto pre = work_dir() / "overfit_pre";
  fs::remove_all(pre);
  if (cli_run(with_settings({"preprocess", "--out", pre.string(), corpus.string()}, kReduced)) != cli::kOk)
    return {false, "preprocess failed"};

  train::RunConfig config;
  for (const auto& s : kReduced) train::apply_override(config, s);
  config.validate();
  const auto index = train::train_only(dsp::read_manifest(pre / "manifest.csv"));
  const auto images = train::load_images(index, index.indices(train::Split::kTrain), pre, config.model.image_size,
                                         config.model.channels);
  train::TrainingState<float> state(config);
  double acc = 0;
  std::size_t epoch = 0;
  while (epoch < 200 && acc < 0.95) {
    train::train_epoch(state, images, config.train);
    ++epoch;
    acc = train::evaluate(state.model, images, config.train.batch_size).accuracy;
  }
  const double elapsed = seconds_since(start);
  return {acc >= 0.95 && elapsed < 600,
          format("%s, %zu tracks / %zu segments: training accuracy %.3f after %zu epochs (limit >= 0.95 within "
                 "200), %.0f s (limit 600 s)",
                 corpus_name().c_str(), genres.size(), images.size(), acc, epoch, elapsed)};
}

Outcome desk_scale_learning() {
  const auto corpus = make_corpus("desk_wav", dsp::default_class_names(), 10, 30.0);
  const auto pre = work_dir() / "desk_pre", run = work_dir() / "desk_run";
  fs::remove_all(pre);
  fs::remove_all(run);
  if (cli_run(with_settings({"preprocess", "--out", pre.string(), corpus.string()}, kReduced)) != cli::kOk)
    return {false, "preprocess failed"};
  auto settings = kReduced;
  settings.insert(settings.end(), {"split=track", "split_ratios=0.8,0.1,0.1", "epochs=30"});
  if (cli_run(with_settings({"train", "--out", run.string(), pre.string()}, settings)) != cli::kOk)
    return {false, "train failed"};
  const auto history = train::read_history(run / "history.csv");
  const auto& last = history.back();
  return {history.size() == 30 && last.val_acc >= 0.30,
          format("%s, 100 tracks, track-level 80/10/10: validation accuracy %.3f after %zu epochs (limit >= 0.30)",
                 corpus_name().c_str(), last.val_acc, history.size())};
}

struct TableRow {
  const char* genre;
  double precision, recall, f1;
};

Outcome table_consistency() {
  const TableRow rows[] = {{"Blues", 0.94, 0.96, 0.95},  {"Classical", 0.99, 0.97, 0.98}, {"Country", 0.89, 0.93, 0.91},
                           {"Disco", 0.95, 0.97, 0.96},  {"Hiphop", 0.93, 0.90, 0.91},    {"Jazz", 0.92, 0.94, 0.93},
                           {"Metal", 0.96, 0.93, 0.95},  {"Pop", 0.99, 0.92, 0.96},       {"Reggae", 0.93, 0.92, 0.93},
                           {"Rock", 0.90, 0.94, 0.92}};
  std::string off;
  std::size_t within = 0, reachable = 0;
  for (const auto& r : rows) {
    const double f1 = eval::f1_score(r.precision, r.recall);
    if (std::abs(f1 - r.f1) <= 0.005) {
      ++within;
    } else {
      off += format(" %s %.4f vs %.2f;", r.genre, f1, r.f1);
    }
    // Could any precision/recall that rounds to the printed pair give the printed F1?
    bool hit = false;
    for (int i = -50; i <= 50 && !hit; ++i)
      for (int j = -50; j <= 50 && !hit; ++j) {
        const double f = eval::f1_score(r.precision + i * 1e-4, r.recall + j * 1e-4);
        hit = std::abs(f - r.f1) <= 0.005;
      }
    reachable += hit;
  }
  return {within == std::size(rows),
          format("%zu/10 recomputed F1 within 0.005 of the table;%s %zu/10 reachable from any precision/recall that "
                 "rounds to the printed values",
                 within, off.empty() ? "" : off.c_str(), reachable)};
}

Outcome metrics_oracle() {
  std::mt19937_64 rng(109);
  const int k = 10;
  std::vector<int> preds(10000), labels(10000);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    labels[i] = static_cast<int>(rng() % k);
    // Biased towards correct so every cell is populated unevenly.
    preds[i] = rng() % 3 == 0 ? labels[i] : static_cast<int>(rng() % k);
  }
  std::vector<std::string> names;
  for (int c = 0; c < k; ++c) names.push_back("c" + std::to_string(c));
  const auto cm = eval::confusion(preds, labels, names);
  std::size_t mismatches = 0, correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  mismatches += eval::accuracy(cm) != double(correct) / double(preds.size());
  for (int c = 0; c < k; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      tp += preds[i] == c && labels[i] == c;
      fp += preds[i] == c && labels[i] != c;
      fn += preds[i] != c && labels[i] == c;
    }
    const auto m = eval::precision_recall_f1(cm, static_cast<std::size_t>(c));
    mismatches += m.precision != double(tp) / double(tp + fp);
    mismatches += m.recall != double(tp) / double(tp + fn);
    mismatches += m.f1 != 2.0 * double(tp) / double(2 * tp + fp + fn);
  }
  return {mismatches == 0, format("10000 pairs, 10 classes: %zu of 31 quantities differ from direct counting",
                                  mismatches)};
}

Outcome dsp_oracle() {
  constexpr int rate = 22050;
  const std::size_t n_fft = 2048, hop = 512;
  std::mt19937_64 rng(110);
  dsp::Segment noise;
  noise.sample_rate = rate;
  noise.samples.resize(16384);
  for (auto& v : noise.samples) v = double(rng() % 2000001) / 1e6 - 1.0;
  const auto spec = dsp::stft(noise, n_fft, hop);
  const std::size_t frame = 8;  // window starts at 8 * 512 - 1024, clear of the padding
  const auto direct = oracle::dft_magnitudes(noise.samples.data() + frame * hop - n_fft / 2, n_fft);
  double worst = 0;
  for (std::size_t k = 0; k < direct.size(); ++k) worst = std::max(worst, std::abs(direct[k] - spec.magnitudes(k, frame)));

  const auto bank = dsp::mel_filterbank(128, n_fft, rate, 0, rate / 2.0);
  std::size_t hits = 0;
  const std::size_t points = 20;
  for (std::size_t p = 0; p < points; ++p) {
    const double hz = 200.0 * std::pow(8000.0 / 200.0, double(p) / double(points - 1));
    dsp::Segment tone;
    tone.sample_rate = rate;
    tone.samples.resize(rate);
    for (std::size_t i = 0; i < tone.samples.size(); ++i)
      tone.samples[i] = 0.5 * std::sin(2 * std::numbers::pi * hz * double(i) / rate);
    const auto mel = dsp::apply_mel(dsp::stft(tone, n_fft, hop), bank);
    const std::size_t mid = mel.cols / 2;
    std::size_t loudest = 0, nearest = 0;
    for (std::size_t m = 0; m < mel.rows; ++m) {
      if (mel(m, mid) > mel(loudest, mid)) loudest = m;
      if (std::abs(bank.center_hz[m] - hz) < std::abs(bank.center_hz[nearest] - hz)) nearest = m;
    }
    hits += loudest == nearest;
  }
  const double rate_hit = double(hits) / double(points);
  return {worst < 1e-4 && rate_hit >= 0.95,
          format("STFT frame vs direct DFT max abs difference %.1e (limit 1e-4); swept tone 200 Hz..8 kHz in the "
                 "nearest-centre mel filter at %zu/%zu points (limit 95%%)",
                 worst, hits, points)};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  const auto corpus = make_corpus("determinism_wav", dsp::default_class_names(), 2, 9.0);
  const auto pre = work_dir() / "determinism_pre";
  fs::remove_all(pre);
  const std::vector<std::string> settings = {"image_size=32", "patch_size=8", "projection_dim=16", "layers=2",
                                             "heads=4", "memory_size=16", "head_hidden=64", "batch_size=8",
                                             "epochs=3", "split=segment"};
  if (cli_run(with_settings({"preprocess", "--out", pre.string(), corpus.string()}, settings)) != cli::kOk)
    return {false, "preprocess failed"};
  std::string ckpt[2], history[2];
  for (int i = 0; i < 2; ++i) {
    const auto run = work_dir() / ("determinism_run" + std::to_string(i));
    fs::remove_all(run);
    if (cli_run(with_settings({"train", "--reproducible", "--seed", "7", "--out", run.string(), pre.string()},
                              settings)) != cli::kOk)
      return {false, "train failed"};
    ckpt[i] = slurp(run / "checkpoint.bin");
    history[i] = slurp(run / "history.csv");
  }
  const bool same = !ckpt[0].empty() && ckpt[0] == ckpt[1] && history[0] == history[1];
  return {same, format("two reproducible runs: checkpoints (%zu bytes) %s, history CSVs %s", ckpt[0].size(),
                       ckpt[0] == ckpt[1] ? "identical" : "differ", history[0] == history[1] ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", gradient_correctness},
      {2, "double-normalisation invariant", double_normalization},
      {3, "oracle equivalence", oracle_equivalence},
      {4, "permutation property", permutation_property},
      {5, "attention complexity", complexity},
      {6, "overfit smoke", overfit_smoke},
      {7, "desk-scale learning", desk_scale_learning},
      {8, "per-class F1 table consistency", table_consistency},
      {9, "metrics oracle", metrics_oracle},
      {10, "DSP oracle", dsp_oracle},
      {11, "determinism", determinism},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  fs::create_directories(work_dir());

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << format(" [%2d] ", c.id) << c.name << ": " << o.detail
              << format(" (%.1f s)", seconds_since(start)) << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
  return failed ? 1 : 0;
}
