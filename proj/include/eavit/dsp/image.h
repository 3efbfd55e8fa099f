#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eavit/dsp/spectrogram.h"

namespace eavit::dsp {

// 8-bit image, row-major, channels interleaved.
struct MelImage {
  std::vector<std::uint8_t> pixels;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::optional<int> label;
  std::string track_id;

  std::uint8_t at(std::size_t row, std::size_t col, std::size_t channel = 0) const {
    return pixels[(row * width + col) * channels + channel];
  }
};

// Bilinearly resamples (half-pixel centres, edge clamped).
Matrix resize_bilinear(const Matrix& in, std::size_t height, std::size_t width);

// Resizes the dB matrix to height x width, flips it so the lowest mel band is
// the bottom row, then maps min..max onto 0..255. A constant matrix becomes
// an all-zero image. channels == 3 replicates the grey level.
MelImage to_image(const Matrix& mel_db, std::size_t height, std::size_t width, std::size_t channels = 1);

// Binary PGM (P5) for one channel, PPM (P6) for three.
void write_pnm(const std::filesystem::path& path, const MelImage& image);
MelImage read_pnm(const std::filesystem::path& path);

}  // namespace eavit::dsp
