#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eavit/dsp/audio.h"
#include "eavit/dsp/image.h"
#include "eavit/dsp/spectrogram.h"

namespace eavit::dsp {

// GTZAN genre order; labels are indices into this list.
std::vector<std::string> default_class_names();

struct PreprocessConfig {
  double segment_seconds = 3.0;
  std::size_t n_fft = 2048;
  std::size_t hop = 512;
  std::size_t n_mels = 128;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 means sample_rate / 2
  double top_db = 80.0;
  std::size_t image_size = 256;
  std::size_t channels = 1;
  std::vector<std::string> class_names = default_class_names();

  bool operator==(const PreprocessConfig&) const = default;
};

// segment -> |STFT|^2 -> mel -> dB -> image.
MelImage mel_image(const Segment& segment, const PreprocessConfig& config);

// Segments a whole clip and converts every segment.
std::vector<MelImage> mel_images(const AudioClip& clip, const PreprocessConfig& config,
                                 const std::string& track_id);

struct ManifestRow {
  std::string path;  // relative to the manifest's directory
  std::string track_id;
  std::size_t segment_index = 0;
  int label = 0;
};

inline constexpr const char* kManifestHeader = "path,track_id,segment_index,label";

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

struct SkippedFile {
  std::string path;
  std::string reason;
};

struct PreprocessReport {
  std::vector<ManifestRow> rows;
  std::vector<SkippedFile> skipped;
  std::filesystem::path manifest_path;
};

// Converts root/<genre>/<file>.wav into out_dir/images/<genre>/<stem>_<k>.pgm
// plus out_dir/manifest.csv, in sorted (genre, file) order. Unreadable files
// are skipped and listed in the report and in out_dir/skipped.txt. Throws
// DataError when root holds no audio or names an unknown genre.
PreprocessReport preprocess_dataset(const std::filesystem::path& root, const std::filesystem::path& out_dir,
                                    const PreprocessConfig& config);

}  // namespace eavit::dsp
