#include "eavit/dsp/preprocess.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "eavit/errors.h"

namespace eavit::dsp {
namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool want_directories) {
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (want_directories ? entry.is_directory() : entry.is_regular_file()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<std::string> default_class_names() {
  return {"blues", "classical", "country", "disco", "hiphop", "jazz", "metal", "pop", "reggae", "rock"};
}

MelImage mel_image(const Segment& segment, const PreprocessConfig& config) {
  const Spectrogram spec = stft(segment, config.n_fft, config.hop, WindowKind::kHann);
  const double nyquist = segment.sample_rate / 2.0;
  const double fmax = config.fmax > 0 ? config.fmax : nyquist;
  const MelFilterBank bank = mel_filterbank(config.n_mels, config.n_fft, segment.sample_rate, config.fmin, fmax);
  const Matrix db = power_to_db(apply_mel(spec, bank), config.top_db);
  MelImage img = to_image(db, config.image_size, config.image_size, config.channels);
  img.track_id = segment.parent_track_id;
  return img;
}

std::vector<MelImage> mel_images(const AudioClip& clip, const PreprocessConfig& config,
                                 const std::string& track_id) {
  std::vector<MelImage> out;
  for (const Segment& seg : segment(clip, config.segment_seconds, track_id)) {
    MelImage img = mel_image(seg, config);
    img.label = clip.label;
    out.push_back(std::move(img));
  }
  return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write manifest");
  out << kManifestHeader << '\n';
  for (const auto& r : rows) out << r.path << ',' << r.track_id << ',' << r.segment_index << ',' << r.label << '\n';
  if (!out) throw DataError(path.string() + ": manifest write failed");
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open manifest");
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw DataError(path.string() + ": expected header '" + kManifestHeader + "'");
  }
  std::vector<ManifestRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 4) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 4 fields");
    }
    try {
      ManifestRow row{fields[0], fields[1], std::stoul(fields[2]), std::stoi(fields[3])};
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  return rows;
}

PreprocessReport preprocess_dataset(const fs::path& root, const fs::path& out_dir, const PreprocessConfig& config) {
  if (!fs::is_directory(root)) throw DataError(root.string() + ": not a directory");
  std::vector<std::string> known;
  for (const auto& name : config.class_names) known.push_back(lower(name));

  struct Job {
    fs::path file;
    std::string genre;
    int label;
  };
  std::vector<Job> jobs;
  for (const fs::path& genre_dir : sorted_entries(root, true)) {
    const std::string genre = genre_dir.filename().string();
    const auto it = std::find(known.begin(), known.end(), lower(genre));
    if (it == known.end()) throw DataError(genre_dir.string() + ": '" + genre + "' is not a configured class");
    for (const fs::path& file : sorted_entries(genre_dir, false)) {
      if (lower(file.extension().string()) != ".wav") continue;
      jobs.push_back({file, genre, static_cast<int>(it - known.begin())});
    }
  }
  if (jobs.empty()) throw DataError(root.string() + ": no WAV files under <genre>/ subdirectories");

  PreprocessReport report;
  fs::create_directories(out_dir);
  for (const Job& job : jobs) {
    const std::string stem = job.file.stem().string();
    const std::string track_id = job.genre + "/" + stem;
    std::vector<MelImage> images;
    try {
      AudioClip clip = load_wav(job.file);
      clip.label = job.label;
      images = mel_images(clip, config, track_id);
    } catch (const DataError& e) {
      report.skipped.push_back({job.file.string(), e.what()});
      continue;
    }
    const fs::path image_dir = out_dir / "images" / job.genre;
    fs::create_directories(image_dir);
    const char* ext = config.channels == 3 ? ".ppm" : ".pgm";
    for (std::size_t k = 0; k < images.size(); ++k) {
      const std::string index = (k < 10 ? "_0" : "_") + std::to_string(k);
      const fs::path rel = fs::path("images") / job.genre / (stem + index + ext);
      write_pnm(out_dir / rel, images[k]);
      report.rows.push_back({rel.generic_string(), track_id, k, job.label});
    }
  }

  report.manifest_path = out_dir / "manifest.csv";
  write_manifest(report.manifest_path, report.rows);
  std::ofstream skipped(out_dir / "skipped.txt", std::ios::binary);
  for (const auto& s : report.skipped) skipped << s.path << '\t' << s.reason << '\n';
  return report;
}

}  // namespace eavit::dsp
