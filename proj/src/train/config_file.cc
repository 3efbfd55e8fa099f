#include "eavit/train/config_file.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "eavit/errors.h"

namespace eavit::train {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  if (trim(text).empty()) return items;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) items.push_back(trim(item));
  return items;
}

template <typename N>
N parse_number(const std::string& key, const std::string& value) {
  N out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw UsageError("invalid value '" + value + "' for " + key);
  }
  if constexpr (std::is_floating_point_v<N>) {
    if (!std::isfinite(out)) throw UsageError("non-finite value for " + key);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw UsageError("invalid value '" + value + "' for " + key + " (expected true or false)");
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename Range, typename Fn>
std::string join(const Range& items, Fn fn) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ',';
    out += fn(item);
  }
  return out;
}

struct Key {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define EAVIT_SIZE_KEY(name, field)                                                                  \
  {name,                                                                                             \
   {[](RunConfig& c, const std::string& k, const std::string& v) {                                   \
      c.field = parse_number<std::size_t>(k, v);                                                     \
    },                                                                                               \
    [](const RunConfig& c) { return std::to_string(c.field); }}}

#define EAVIT_REAL_KEY(name, field)                                                                  \
  {name,                                                                                             \
   {[](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_number<double>(k, v); }, \
    [](const RunConfig& c) { return number(c.field); }}}

const std::vector<std::pair<std::string, Key>>& key_table() {
  static const std::vector<std::pair<std::string, Key>> table = {
      EAVIT_REAL_KEY("segment_seconds", preprocess.segment_seconds),
      EAVIT_SIZE_KEY("n_fft", preprocess.n_fft),
      EAVIT_SIZE_KEY("hop", preprocess.hop),
      EAVIT_SIZE_KEY("n_mels", preprocess.n_mels),
      EAVIT_REAL_KEY("fmin", preprocess.fmin),
      EAVIT_REAL_KEY("fmax", preprocess.fmax),
      EAVIT_REAL_KEY("top_db", preprocess.top_db),
      {"image_size",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.preprocess.image_size = c.model.image_size = parse_number<std::size_t>(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.model.image_size); }}},
      {"channels",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.preprocess.channels = c.model.channels = parse_number<std::size_t>(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.model.channels); }}},
      {"class_names",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.preprocess.class_names = split_list(v);
          c.model.classes = c.preprocess.class_names.size();
        },
        [](const RunConfig& c) { return join(c.preprocess.class_names, [](const std::string& s) { return s; }); }}},
      EAVIT_SIZE_KEY("patch_size", model.patch_size),
      EAVIT_SIZE_KEY("projection_dim", model.projection_dim),
      EAVIT_SIZE_KEY("layers", model.layers),
      EAVIT_SIZE_KEY("heads", model.heads),
      EAVIT_SIZE_KEY("memory_size", model.memory_size),
      EAVIT_REAL_KEY("memory_init_std", model.memory_init_std),
      EAVIT_SIZE_KEY("mlp_hidden", model.mlp_hidden),
      {"head_hidden",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.model.head_hidden.clear();
          for (const auto& item : split_list(v)) c.model.head_hidden.push_back(parse_number<std::size_t>(k, item));
        },
        [](const RunConfig& c) {
          return join(c.model.head_hidden, [](std::size_t n) { return std::to_string(n); });
        }}},
      {"attention",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.model.attention = model::parse_attention_kind(v);
        },
        [](const RunConfig& c) { return model::to_string(c.model.attention); }}},
      EAVIT_REAL_KEY("learning_rate", train.learning_rate),
      EAVIT_REAL_KEY("weight_decay", train.weight_decay),
      EAVIT_SIZE_KEY("batch_size", train.batch_size),
      EAVIT_SIZE_KEY("epochs", train.epochs),
      {"seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.train.seed = parse_number<std::uint64_t>(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }}},
      {"precision",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.precision = parse_number<int>(k, v); },
        [](const RunConfig& c) { return std::to_string(c.train.precision); }}},
      {"reproducible",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.reproducible = parse_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.train.reproducible ? "true" : "false"); }}},
      {"split",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.train.split = parse_split_strategy(v); },
        [](const RunConfig& c) { return to_string(c.train.split); }}},
      {"split_ratios",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          const auto items = split_list(v);
          if (items.size() != 3) throw UsageError("split_ratios needs three values train,val,test");
          c.train.ratios = {parse_number<double>(k, items[0]), parse_number<double>(k, items[1]),
                            parse_number<double>(k, items[2])};
        },
        [](const RunConfig& c) {
          return number(c.train.ratios.train) + "," + number(c.train.ratios.validation) + "," +
                 number(c.train.ratios.test);
        }}},
      {"track_vote",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.train.track_vote = parse_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.train.track_vote ? "true" : "false"); }}},
  };
  return table;
}

#undef EAVIT_SIZE_KEY
#undef EAVIT_REAL_KEY

const Key* find_key(const std::string& key) {
  for (const auto& [name, entry] : key_table())
    if (name == key) return &entry;
  return nullptr;
}

}  // namespace

std::string to_string(SplitStrategy strategy) { return strategy == SplitStrategy::kTrack ? "track" : "segment"; }

SplitStrategy parse_split_strategy(const std::string& text) {
  if (text == "track") return SplitStrategy::kTrack;
  if (text == "segment") return SplitStrategy::kSegment;
  throw UsageError("split must be 'track' or 'segment', got '" + text + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0)) throw UsageError("learning_rate must be non-negative");
  if (!(weight_decay >= 0)) throw UsageError("weight_decay must be non-negative");
  if (batch_size == 0) throw UsageError("batch_size must be positive");
  if (epochs == 0) throw UsageError("epochs must be positive");
  if (precision != 32 && precision != 64) throw UsageError("precision must be 32 or 64");
  const auto& r = ratios;
  if (r.train < 0 || r.validation < 0 || r.test < 0 || std::abs(r.train + r.validation + r.test - 1.0) > 1e-9) {
    throw UsageError("split_ratios must be non-negative and sum to 1");
  }
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (preprocess.class_names.size() != model.classes) throw UsageError("class_names and classes disagree");
  if (preprocess.class_names.size() < 2) throw UsageError("need at least two classes");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& entry : key_table()) out.push_back(entry.first);
    return out;
  }();
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const Key* entry = find_key(key);
  if (!entry) throw UsageError("unknown config key '" + key + "'");
  entry->set(config, key, value);
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("expected KEY=VALUE, got '" + assignment + "'");
  apply_setting(config, trim(std::string_view(assignment).substr(0, eq)),
                trim(std::string_view(assignment).substr(eq + 1)));
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    try {
      apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& [name, entry] : key_table()) out += name + "=" + entry.get(config) + "\n";
  return out;
}

}  // namespace eavit::train
