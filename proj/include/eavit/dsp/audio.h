#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eavit::dsp {

struct AudioClip {
  std::vector<double> samples;  // mono, in [-1, 1]
  int sample_rate = 0;
  std::string source_path;
  std::optional<int> label;

  double duration_seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct Segment {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string parent_track_id;
  std::size_t segment_index = 0;
};

// Reads a RIFF/WAVE file holding mono 16-bit PCM. Samples are divided by
// 32768. Throws DataError for a missing file, truncated header, non-PCM
// encoding, other bit depths or more than one channel.
AudioClip load_wav(const std::filesystem::path& path);

// Decodes an in-memory WAV image with the same rules as load_wav.
AudioClip decode_wav(std::span<const unsigned char> bytes, const std::string& source_name);

// Writes mono 16-bit PCM, clipping to [-1, 1).
void write_wav(const std::filesystem::path& path, std::span<const double> samples, int sample_rate);

// Cuts floor(duration / segment_seconds) contiguous, non-overlapping segments
// of round(segment_seconds * sample_rate) samples from the start of the clip.
// The remainder is dropped.
std::vector<Segment> segment(const AudioClip& clip, double segment_seconds,
                             const std::string& track_id = {});

}  // namespace eavit::dsp
