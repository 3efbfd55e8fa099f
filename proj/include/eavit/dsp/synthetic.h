#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eavit/dsp/audio.h"
#include "eavit/dsp/preprocess.h"

namespace eavit::dsp {

// Stand-in corpus in the GTZAN layout for when the real dataset is absent.
// Each genre index has its own pitch register, tempo, harmonic timbre,
// percussion pattern and noise floor; every track draws its own melody,
// transposition and tempo jitter from (seed, genre, track).
AudioClip synthesize_track(std::size_t genre, std::size_t track, double seconds, int sample_rate,
                           std::uint64_t seed);

struct SyntheticCorpusOptions {
  std::size_t tracks_per_genre = 10;
  double seconds = 30.0;
  int sample_rate = 22050;
  std::uint64_t seed = 0;
  std::vector<std::string> genres = default_class_names();
};

// Writes root/<genre>/<genre>.<NNNNN>.wav, 16-bit mono.
void write_synthetic_corpus(const std::filesystem::path& root, const SyntheticCorpusOptions& options);

}  // namespace eavit::dsp
