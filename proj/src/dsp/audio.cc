#include "eavit/dsp/audio.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "eavit/errors.h"

namespace eavit::dsp {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioClip decode_wav(std::span<const unsigned char> bytes, const std::string& source_name) {
  auto fail = [&](const std::string& why) { throw DataError(source_name + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file (truncated header)");
  }

  bool have_format = false;
  std::uint16_t channels = 0;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) fail("truncated fmt chunk");
      std::uint16_t format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible && size >= 26 && body + 26 <= bytes.size()) {
        format = read_u16(bytes.data() + body + 24);
      }
      if (format != kFormatPcm) fail("encoding " + std::to_string(format) + " is not PCM");
      if (channels != 1) fail("channel count " + std::to_string(channels) + " unsupported");
      if (bits != 16) fail("bit depth " + std::to_string(bits) + " unsupported (need 16-bit)");
      if (rate == 0) fail("sample rate is zero");
      have_format = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_format) fail("data chunk precedes fmt chunk");
      const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
      if (available < size) fail("truncated data chunk");
      const std::size_t count = available / 2;
      if (count == 0) fail("no audio samples");
      AudioClip clip;
      clip.sample_rate = static_cast<int>(rate);
      clip.source_path = source_name;
      clip.samples.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        clip.samples[i] = static_cast<double>(raw) / 32768.0;
      }
      return clip;
    }
    pos = body + size + (size & 1u);
  }
  fail(have_format ? "missing data chunk" : "missing fmt chunk (truncated header)");
  return {};
}

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples, int sample_rate) {
  std::string out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.append("RIFF");
  put_u32(out, 36 + data_bytes);
  out.append("WAVEfmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.append("data");
  put_u32(out, data_bytes);
  for (double s : samples) {
    const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError(path.string() + ": cannot write file");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError(path.string() + ": write failed");
}

std::vector<Segment> segment(const AudioClip& clip, double segment_seconds, const std::string& track_id) {
  if (segment_seconds <= 0) throw UsageError("segment length must be positive");
  const auto length = static_cast<std::size_t>(std::llround(segment_seconds * clip.sample_rate));
  if (length == 0 || clip.samples.size() < length) {
    throw DataError(clip.source_path + ": clip of " + std::to_string(clip.duration_seconds()) +
                    " s is shorter than one " + std::to_string(segment_seconds) + " s segment");
  }
  const std::size_t count = clip.samples.size() / length;
  std::vector<Segment> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Segment seg;
    seg.sample_rate = clip.sample_rate;
    seg.parent_track_id = track_id.empty() ? clip.source_path : track_id;
    seg.segment_index = i;
    const auto first = clip.samples.begin() + static_cast<std::ptrdiff_t>(i * length);
    seg.samples.assign(first, first + static_cast<std::ptrdiff_t>(length));
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace eavit::dsp
