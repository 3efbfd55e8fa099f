#include "eavit/train/checkpoint.h"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "eavit/errors.h"

namespace eavit::train {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'E', 'A', 'V', 'T'};

class Writer {
 public:
  template <typename V>
  void put(V value) {
    static_assert(std::is_trivially_copyable_v<V>);
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(V));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  template <typename V>
  void put_span(std::span<const V> values) {
    const auto* p = reinterpret_cast<const char*>(values.data());
    bytes_.insert(bytes_.end(), p, p + values.size_bytes());
  }
  std::vector<char>& bytes() { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<char>& bytes, std::size_t end, std::string name)
      : bytes_(bytes), end_(end), name_(std::move(name)) {}

  template <typename V>
  V get() {
    V value;
    std::memcpy(&value, take(sizeof(V)), sizeof(V));
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    const char* p = take(n);
    return std::string(p, n);
  }
  template <typename V>
  void get_span(std::span<V> out) {
    std::memcpy(out.data(), take(out.size_bytes()), out.size_bytes());
  }
  bool done() const { return pos_ == end_; }

 private:
  const char* take(std::uint64_t n) {
    if (n > end_ - pos_) throw DataError(name_ + ": checkpoint ends early");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::vector<char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
  std::string name_;
};

std::uint32_t crc(const char* data, std::size_t size) {
  uLong value = crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    value = crc32(value, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(value);
}

// Reads the file, checks magic, checksum and version; returns a reader
// positioned after the version.
struct Verified {
  std::vector<char> bytes;
  std::uint32_t scalar_bytes = 0;
  RunConfig config;
};

Verified verify(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  Verified v;
  v.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (v.bytes.size() < 4 || std::memcmp(v.bytes.data(), kMagic, 4) != 0) {
    throw DataError(name + ": not an EAViT checkpoint (bad magic)");
  }
  if (v.bytes.size() < 16) throw DataError(name + ": checkpoint checksum mismatch (file truncated)");
  const std::size_t body = v.bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, v.bytes.data() + body, 4);
  if (stored != crc(v.bytes.data(), body)) throw DataError(name + ": checkpoint checksum mismatch");
  std::uint32_t version;
  std::memcpy(&version, v.bytes.data() + 4, 4);
  if (version != kCheckpointVersion) {
    throw DataError(name + ": unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  std::memcpy(&v.scalar_bytes, v.bytes.data() + 8, 4);
  Reader r(v.bytes, body, name);
  r.get<std::uint32_t>();
  r.get<std::uint32_t>();
  r.get<std::uint32_t>();
  try {
    v.config = parse_config(r.get_string());
    v.config.validate();
  } catch (const UsageError& e) {
    throw DataError(name + ": invalid stored config: " + e.what());
  }
  return v;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, const TrainingState<T>& state) {
  Writer w;
  w.bytes().insert(w.bytes().end(), kMagic, kMagic + 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(sizeof(T));
  w.put_string(format_config(config));

  const auto params = state.model.parameters();
  w.put<std::uint64_t>(params.size());
  for (const auto& p : params) {
    w.put_string(p.name);
    w.put<std::uint64_t>(p.value.numel());
    w.put_span<T>(p.value.data());
  }

  const auto& opt = state.optimizer;
  w.put<std::uint64_t>(opt.step);
  w.put<double>(opt.beta1);
  w.put<double>(opt.beta2);
  w.put<double>(opt.eps);
  w.put<std::uint64_t>(opt.first_moment.size());
  for (std::size_t k = 0; k < opt.first_moment.size(); ++k) {
    w.put<std::uint64_t>(opt.first_moment[k].size());
    w.put_span<T>(opt.first_moment[k]);
    w.put_span<T>(opt.second_moment[k]);
  }

  w.put<std::uint64_t>(state.epoch);
  std::ostringstream engine;
  engine << state.rng;
  w.put_string(engine.str());

  w.put<std::uint64_t>(state.history.size());
  for (const auto& e : state.history) {
    w.put<std::uint64_t>(e.epoch);
    w.put<double>(e.train_loss);
    w.put<double>(e.train_acc);
    w.put<double>(e.val_loss);
    w.put<double>(e.val_acc);
  }
  w.put<std::uint32_t>(crc(w.bytes().data(), w.bytes().size()));

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw DataError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  auto v = verify(path);
  const std::string name = path.string();
  if (v.scalar_bytes != sizeof(T)) {
    throw DataError(name + ": checkpoint holds " + std::to_string(8 * v.scalar_bytes) + "-bit parameters, expected " +
                    std::to_string(8 * sizeof(T)));
  }
  Checkpoint<T> ck{v.config, TrainingState<T>(v.config)};
  Reader r(v.bytes, v.bytes.size() - 4, name);
  for (int i = 0; i < 3; ++i) r.get<std::uint32_t>();
  r.get_string();

  const auto params = ck.state.model.parameters();
  if (r.get<std::uint64_t>() != params.size()) throw DataError(name + ": tensor count does not match config");
  for (const auto& p : params) {
    const auto stored_name = r.get_string();
    const auto numel = r.get<std::uint64_t>();
    if (stored_name != p.name || numel != p.value.numel()) {
      throw DataError(name + ": tensor '" + stored_name + "' does not match expected '" + p.name + "'");
    }
    Tensor<T> handle = p.value;
    r.get_span<T>(handle.data());
  }

  auto& opt = ck.state.optimizer;
  opt.step = r.get<std::uint64_t>();
  opt.beta1 = r.get<double>();
  opt.beta2 = r.get<double>();
  opt.eps = r.get<double>();
  const auto buffers = r.get<std::uint64_t>();
  if (buffers != 0 && buffers != params.size()) throw DataError(name + ": optimizer buffers do not match");
  for (std::size_t k = 0; k < buffers; ++k) {
    const auto n = r.get<std::uint64_t>();
    if (n != params[k].value.numel()) throw DataError(name + ": optimizer buffer size mismatch");
    opt.first_moment.emplace_back(n);
    opt.second_moment.emplace_back(n);
    r.get_span<T>(std::span<T>(opt.first_moment.back()));
    r.get_span<T>(std::span<T>(opt.second_moment.back()));
  }

  ck.state.epoch = r.get<std::uint64_t>();
  std::istringstream engine(r.get_string());
  engine >> ck.state.rng;
  if (!engine) throw DataError(name + ": bad engine state");

  const auto rows = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < rows; ++i) {
    EpochStats e;
    e.epoch = r.get<std::uint64_t>();
    e.train_loss = r.get<double>();
    e.train_acc = r.get<double>();
    e.val_loss = r.get<double>();
    e.val_acc = r.get<double>();
    ck.state.history.push_back(e);
  }
  if (!r.done()) throw DataError(name + ": trailing bytes in checkpoint");
  return ck;
}

RunConfig checkpoint_config(const std::filesystem::path& path) { return verify(path).config; }

template void save_checkpoint<float>(const std::filesystem::path&, const RunConfig&, const TrainingState<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const RunConfig&, const TrainingState<double>&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace eavit::train
