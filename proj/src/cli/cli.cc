#include "eavit/cli/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "eavit/dsp/audio.h"
#include "eavit/dsp/preprocess.h"
#include "eavit/dsp/synthetic.h"
#include "eavit/errors.h"
#include "eavit/eval/metrics.h"
#include "eavit/train/checkpoint.h"
#include "eavit/train/config_file.h"
#include "eavit/train/dataset.h"
#include "eavit/train/trainer.h"

namespace eavit::cli {
namespace {

namespace fs = std::filesystem;
using train::RunConfig;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool reproducible = false;
  std::string checkpoint;
};

void add_config_flags(CLI::App& cmd, Common& c) {
  cmd.add_option("--config", c.config_path, "key=value configuration file");
  cmd.add_option("--set", c.overrides, "override one config key (KEY=VALUE, repeatable)");
  cmd.add_option("--seed", c.seed, "random seed (overrides the config)");
  cmd.add_flag("--reproducible", c.reproducible, "deterministic mode");
}

void apply_common(RunConfig& config, const Common& c) {
  for (const auto& o : c.overrides) train::apply_override(config, o);
  if (c.seed) config.train.seed = *c.seed;
  if (c.reproducible) config.train.reproducible = true;
}

RunConfig resolve_config(const Common& c) {
  RunConfig config = c.config_path.empty() ? RunConfig{} : train::load_config(c.config_path);
  apply_common(config, c);
  config.validate();
  return config;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

fs::path require_manifest(const std::string& data_dir) {
  const fs::path manifest = fs::path(data_dir) / "manifest.csv";
  if (!fs::exists(manifest)) {
    throw DataError("no manifest.csv in " + data_dir + " (run 'eavit preprocess' first)");
  }
  return manifest;
}

train::DatasetIndex split_for(const RunConfig& config, const fs::path& manifest) {
  return train::split_dataset(dsp::read_manifest(manifest), config.train.split, config.train.ratios,
                              config.train.seed, config.model.classes);
}

void make_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir);
}

// ---- preprocess ---------------------------------------------------------

int preprocess(const Common& c, const std::string& input, std::ostream& out) {
  const auto config = resolve_config(c);
  if (c.out_dir.empty()) throw UsageError("preprocess needs --out");
  if (!fs::is_directory(input)) throw DataError("input directory " + input + " does not exist");
  make_out_dir(c.out_dir);
  std::ofstream(fs::path(c.out_dir) / "config.txt") << train::format_config(config);
  const auto report = dsp::preprocess_dataset(input, c.out_dir, config.preprocess);
  out << "wrote " << report.rows.size() << " images to " << c.out_dir << " (" << report.skipped.size()
      << " files skipped)\n";
  for (const auto& s : report.skipped) out << "skipped " << s.path << ": " << s.reason << '\n';
  return kOk;
}

// ---- train --------------------------------------------------------------

void write_curves(const fs::path& path, const train::History& history) {
  eval::Series train_loss{"train", {}}, val_loss{"val", {}}, train_acc{"train", {}}, val_acc{"val", {}};
  for (const auto& e : history) {
    train_loss.values.push_back(e.train_loss);
    val_loss.values.push_back(e.val_loss);
    train_acc.values.push_back(e.train_acc);
    val_acc.values.push_back(e.val_acc);
  }
  eval::write_curves_svg(path, {"loss", "accuracy"}, {{train_loss, val_loss}, {train_acc, val_acc}});
}

template <typename T>
int train_run(const RunConfig& config, const Common& c, const std::string& data_dir, std::ostream& out) {
  const auto manifest = require_manifest(data_dir);
  const auto index = split_for(config, manifest);
  const auto train_set = train::load_images(index, index.indices(train::Split::kTrain), data_dir,
                                            config.model.image_size, config.model.channels);
  const auto val_set = train::load_images(index, index.indices(train::Split::kValidation), data_dir,
                                          config.model.image_size, config.model.channels);
  if (train_set.size() == 0) throw DataError("training split is empty");

  std::optional<train::TrainingState<T>> state;
  if (!c.checkpoint.empty()) {
    auto loaded = train::load_checkpoint<T>(c.checkpoint);
    state.emplace(std::move(loaded.state));
  } else {
    state.emplace(config);
  }

  const fs::path dir = c.out_dir;
  make_out_dir(c.out_dir);
  std::ofstream(dir / "config.txt") << train::format_config(config);
  train::write_split(dir / "split.csv", index);
  out << "train " << train_set.size() << " / val " << val_set.size() << " segments, "
      << state->model.parameter_count() << " parameters, epochs " << state->epoch << " -> " << config.train.epochs
      << '\n';

  train::fit<T>(*state, train_set, val_set, config, [&](const train::TrainingState<T>& s) {
    const auto& e = s.history.back();
    out << "epoch " << e.epoch << " train_loss " << fixed(e.train_loss) << " train_acc " << fixed(e.train_acc)
        << " val_loss " << fixed(e.val_loss) << " val_acc " << fixed(e.val_acc) << std::endl;
    train::save_checkpoint(dir / "checkpoint.bin", config, s);
    train::log_history(s.history, dir / "history.csv");
  });
  if (!state->history.empty()) {
    train::log_history(state->history, dir / "history.csv");
    write_curves(dir / "curves.svg", state->history);
  }
  return kOk;
}

int train_command(const Common& c, const std::string& data_dir, std::ostream& out) {
  if (c.out_dir.empty()) throw UsageError("train needs --out");
  RunConfig config;
  if (!c.checkpoint.empty()) {
    if (!c.config_path.empty()) throw UsageError("--config cannot be combined with --checkpoint (resume)");
    const auto stored = train::checkpoint_config(c.checkpoint);
    config = stored;
    apply_common(config, c);
    config.validate();
    RunConfig shape_check = config;
    shape_check.train = stored.train;
    if (!(shape_check == stored)) throw UsageError("only training keys may be overridden when resuming");
  } else {
    config = resolve_config(c);
  }
  return config.train.precision == 64 ? train_run<double>(config, c, data_dir, out)
                                      : train_run<float>(config, c, data_dir, out);
}

// ---- eval ---------------------------------------------------------------

RunConfig checkpoint_run_config(const Common& c) {
  if (c.checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (!c.config_path.empty()) throw UsageError("the configuration comes from the checkpoint; drop --config");
  const auto stored = train::checkpoint_config(c.checkpoint);
  RunConfig config = stored;
  apply_common(config, c);
  config.validate();
  if (!(config.model == stored.model) || !(config.preprocess == stored.preprocess)) {
    throw UsageError("model and preprocessing keys cannot be overridden for a trained checkpoint");
  }
  return config;
}

template <typename T>
int eval_run(const RunConfig& config, const Common& c, const std::string& data_dir, const std::string& subset,
             std::ostream& out) {
  const auto ck = train::load_checkpoint<T>(c.checkpoint);
  const auto manifest = require_manifest(data_dir);
  const auto index = split_for(config, manifest);
  std::vector<std::size_t> rows;
  if (subset == "all") {
    for (std::size_t i = 0; i < index.entries.size(); ++i) rows.push_back(i);
  } else {
    rows = index.indices(subset == "train" ? train::Split::kTrain
                         : subset == "val" ? train::Split::kValidation
                                           : train::Split::kTest);
  }
  if (rows.empty()) throw DataError("the " + subset + " split is empty");
  const auto images = train::load_images(index, rows, data_dir, config.model.image_size, config.model.channels);
  const auto probs = train::predict_probabilities(ck.state.model, images, config.train.batch_size);

  std::vector<int> predicted, truth;
  std::vector<std::string> names;
  const auto& classes = config.preprocess.class_names;
  if (config.train.track_vote) {
    for (const auto& t : eval::majority_vote(probs, images.labels, images.track_ids)) {
      predicted.push_back(t.predicted);
      truth.push_back(t.label);
      names.push_back(t.track_id);
    }
  } else {
    for (std::size_t i = 0; i < probs.size(); ++i) {
      predicted.push_back(static_cast<int>(std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin()));
      truth.push_back(images.labels[i]);
      names.push_back(index.entries[rows[i]].path);
    }
  }
  const auto cm = eval::confusion(predicted, truth, classes);
  const auto report = eval::report(cm);

  const fs::path dir = c.out_dir;
  make_out_dir(c.out_dir);
  eval::write_metrics_csv(dir / "metrics.csv", report);
  eval::write_confusion_csv(dir / "confusion.csv", cm);
  eval::write_confusion_svg(dir / "confusion.svg", cm);
  {
    std::ofstream summary(dir / "summary.csv");
    summary << "level,subset,samples,accuracy,macro_precision,macro_recall,macro_f1\n"
            << (config.train.track_vote ? "track" : "segment") << ',' << subset << ',' << predicted.size() << ','
            << fixed(report.accuracy, 6) << ',' << fixed(report.macro_precision, 6) << ','
            << fixed(report.macro_recall, 6) << ',' << fixed(report.macro_f1, 6) << '\n';
    std::ofstream preds(dir / "predictions.csv");
    preds << (config.train.track_vote ? "track_id" : "path") << ",label,predicted\n";
    for (std::size_t i = 0; i < predicted.size(); ++i)
      preds << names[i] << ',' << classes[truth[i]] << ',' << classes[predicted[i]] << '\n';
  }
  if (!ck.state.history.empty()) write_curves(dir / "curves.svg", ck.state.history);

  out << (config.train.track_vote ? "track" : "segment") << "-level " << subset << " accuracy "
      << fixed(report.accuracy) << " over " << predicted.size() << " samples\n";
  out << "class,precision,recall,f1\n";
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& m = report.per_class[k];
    out << classes[k] << ',' << fixed(m.precision) << ',' << fixed(m.recall) << ',' << fixed(m.f1)
        << (m.precision_undefined || m.recall_undefined ? ",undefined" : "") << '\n';
  }
  out << "macro," << fixed(report.macro_precision) << ',' << fixed(report.macro_recall) << ','
      << fixed(report.macro_f1) << '\n';
  return kOk;
}

int eval_command(const Common& c, const std::string& data_dir, const std::string& subset, std::ostream& out) {
  if (c.out_dir.empty()) throw UsageError("eval needs --out");
  const auto config = checkpoint_run_config(c);
  return config.train.precision == 64 ? eval_run<double>(config, c, data_dir, subset, out)
                                      : eval_run<float>(config, c, data_dir, subset, out);
}

// ---- predict ------------------------------------------------------------

template <typename T>
int predict_run(const RunConfig& config, const Common& c, const std::vector<std::string>& files,
                std::ostream& out) {
  const auto ck = train::load_checkpoint<T>(c.checkpoint);
  const auto& classes = config.preprocess.class_names;
  for (const auto& file : files) {
    const auto clip = dsp::load_wav(file);
    train::ImageSet set;
    set.images = dsp::mel_images(clip, config.preprocess, file);
    for (std::size_t i = 0; i < set.images.size(); ++i) {
      set.labels.push_back(0);
      set.track_ids.push_back(file);
    }
    const auto probs = train::predict_probabilities(ck.state.model, set, config.train.batch_size);
    for (std::size_t s = 0; s < probs.size(); ++s) {
      const auto best = static_cast<std::size_t>(std::max_element(probs[s].begin(), probs[s].end()) - probs[s].begin());
      out << file << "\tsegment " << s << '\t' << classes[best] << '\t' << fixed(probs[s][best]) << '\n';
    }
    const auto winner = static_cast<std::size_t>(eval::vote(probs));
    double mean = 0;
    std::size_t votes = 0;
    for (const auto& p : probs) {
      mean += p[winner];
      votes += static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()) == winner;
    }
    mean /= static_cast<double>(probs.size());
    out << file << "\ttrack\t" << classes[winner] << '\t' << fixed(mean) << "\t(" << votes << '/' << probs.size()
        << " segments)\n";
  }
  return kOk;
}

int predict_command(const Common& c, const std::vector<std::string>& files, std::ostream& out) {
  const auto config = checkpoint_run_config(c);
  return config.train.precision == 64 ? predict_run<double>(config, c, files, out)
                                      : predict_run<float>(config, c, files, out);
}

// ---- bench-attn ---------------------------------------------------------

std::vector<std::size_t> parse_tokens(const std::string& text) {
  std::vector<std::size_t> tokens;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      tokens.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("--tokens expects a comma-separated list of positive integers, got '" + text + "'");
    }
  }
  if (tokens.empty()) throw UsageError("--tokens is empty");
  return tokens;
}

int bench_command(const BenchOptions& options, const std::string& out_dir, std::ostream& out) {
  if (options.dim % options.heads != 0) throw UsageError("--dim must be divisible by --heads");
  if (options.repeats == 0 || options.batch == 0 || options.memory == 0) {
    throw UsageError("--batch, --memory and --repeats must be positive");
  }
  const auto rows = bench_attention(options);
  std::string csv = "kind,N,median_ms\n";
  for (const auto& r : rows) csv += r.kind + "," + std::to_string(r.tokens) + "," + fixed(r.median_ms, 4) + "\n";
  if (!out_dir.empty()) {
    make_out_dir(out_dir);
    std::ofstream(fs::path(out_dir) / "bench_attn.csv") << csv;
  }
  out << csv;
  for (const std::string kind : {"external", "self"}) {
    const BenchRow *first = nullptr, *last = nullptr;
    for (const auto& r : rows)
      if (r.kind == kind) {
        if (!first) first = &r;
        last = &r;
      }
    if (first && last != first) {
      out << "# " << kind << " ratio N=" << last->tokens << "/N=" << first->tokens << ": "
          << fixed(last->median_ms / first->median_ms, 2) << '\n';
    }
  }
  return kOk;
}

int synth_command(const std::string& out_dir, const dsp::SyntheticCorpusOptions& options, std::ostream& out) {
  if (options.tracks_per_genre == 0 || !(options.seconds > 0) || options.sample_rate <= 0) {
    throw UsageError("synth needs --tracks, --seconds and --rate above zero");
  }
  dsp::write_synthetic_corpus(out_dir, options);
  out << "wrote " << options.tracks_per_genre * options.genres.size() << " tracks to " << out_dir << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"EAViT music genre classifier", "eavit"};
  app.require_subcommand(1);
  app.fallthrough(false);

  Common common;
  std::string input, data_dir, subset = "test", tokens = "128,256,512";
  std::vector<std::string> files;
  BenchOptions bench;
  dsp::SyntheticCorpusOptions synth;

  auto* pre = app.add_subcommand("preprocess", "convert genre folders of WAV files into mel images");
  add_config_flags(*pre, common);
  pre->add_option("--out", common.out_dir, "output directory")->required();
  pre->add_option("input", input, "dataset root holding one folder per genre")->required();

  auto* tr = app.add_subcommand("train", "train a model on a preprocessed dataset");
  add_config_flags(*tr, common);
  tr->add_option("--out", common.out_dir, "run directory")->required();
  tr->add_option("--checkpoint", common.checkpoint, "resume from this checkpoint");
  tr->add_option("data", data_dir, "preprocessed directory holding manifest.csv")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  ev->add_option("--set", common.overrides, "override one config key (KEY=VALUE, repeatable)");
  ev->add_option("--config", common.config_path, "not accepted; the checkpoint carries its config");
  ev->add_option("--out", common.out_dir, "report directory")->required();
  ev->add_option("--checkpoint", common.checkpoint, "trained checkpoint")->required();
  ev->add_option("--subset", subset, "test, val, train or all")
      ->check(CLI::IsMember({"test", "val", "train", "all"}));
  ev->add_option("data", data_dir, "preprocessed directory holding manifest.csv")->required();

  auto* pr = app.add_subcommand("predict", "classify WAV files");
  pr->add_option("--set", common.overrides, "override one config key (KEY=VALUE, repeatable)");
  pr->add_option("--checkpoint", common.checkpoint, "trained checkpoint")->required();
  pr->add_option("files", files, "WAV files")->required();

  auto* be = app.add_subcommand("bench-attn", "time external attention against self-attention");
  be->add_option("--tokens", tokens, "comma-separated token counts");
  be->add_option("--out", common.out_dir, "directory for bench_attn.csv");
  be->add_option("--batch", bench.batch, "batch size");
  be->add_option("--dim", bench.dim, "model dimension");
  be->add_option("--heads", bench.heads, "attention heads");
  be->add_option("--memory", bench.memory, "external memory size");
  be->add_option("--repeats", bench.repeats, "timed runs per point (median reported)");
  be->add_option("--seed", bench.seed, "random seed");

  auto* sy = app.add_subcommand("synth", "write a synthetic corpus in the genre-folder layout");
  sy->add_option("--out", common.out_dir, "corpus root")->required();
  sy->add_option("--tracks", synth.tracks_per_genre, "tracks per genre");
  sy->add_option("--seconds", synth.seconds, "track length in seconds");
  sy->add_option("--rate", synth.sample_rate, "sample rate in Hz");
  sy->add_option("--seed", synth.seed, "random seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    err << "eavit: " << e.what() << "\n" << "run 'eavit --help' for usage\n";
    return kUsage;
  }

  try {
    if (pre->parsed()) return preprocess(common, input, out);
    if (tr->parsed()) return train_command(common, data_dir, out);
    if (ev->parsed()) return eval_command(common, data_dir, subset, out);
    if (pr->parsed()) return predict_command(common, files, out);
    if (sy->parsed()) return synth_command(common.out_dir, synth, out);
    if (be->parsed()) {
      bench.tokens = parse_tokens(tokens);
      return bench_command(bench, common.out_dir, out);
    }
  } catch (const UsageError& e) {
    err << "eavit: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "eavit: numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "eavit: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace eavit::cli
