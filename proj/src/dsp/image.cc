#include "eavit/dsp/image.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "eavit/errors.h"

namespace eavit::dsp {

Matrix resize_bilinear(const Matrix& in, std::size_t height, std::size_t width) {
  if (in.rows == 0 || in.cols == 0 || height == 0 || width == 0) throw ShapeError("resize of an empty matrix");
  Matrix out(height, width);
  const double sy = static_cast<double>(in.rows) / static_cast<double>(height);
  const double sx = static_cast<double>(in.cols) / static_cast<double>(width);
  for (std::size_t r = 0; r < height; ++r) {
    const double y = std::clamp((static_cast<double>(r) + 0.5) * sy - 0.5, 0.0, static_cast<double>(in.rows - 1));
    const auto y0 = static_cast<std::size_t>(y);
    const std::size_t y1 = std::min(y0 + 1, in.rows - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t c = 0; c < width; ++c) {
      const double x =
          std::clamp((static_cast<double>(c) + 0.5) * sx - 0.5, 0.0, static_cast<double>(in.cols - 1));
      const auto x0 = static_cast<std::size_t>(x);
      const std::size_t x1 = std::min(x0 + 1, in.cols - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = in(y0, x0) * (1 - fx) + in(y0, x1) * fx;
      const double bottom = in(y1, x0) * (1 - fx) + in(y1, x1) * fx;
      out(r, c) = top * (1 - fy) + bottom * fy;
    }
  }
  return out;
}

MelImage to_image(const Matrix& mel_db, std::size_t height, std::size_t width, std::size_t channels) {
  if (channels != 1 && channels != 3) throw UsageError("image channels must be 1 or 3");
  for (double v : mel_db.values) {
    if (!std::isfinite(v)) throw DataError("mel spectrogram contains non-finite values");
  }
  const Matrix resized = resize_bilinear(mel_db, height, width);
  const auto [lo, hi] = std::minmax_element(resized.values.begin(), resized.values.end());
  const double low = *lo;
  const double span = *hi - *lo;

  MelImage img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.assign(height * width * channels, 0);
  if (span <= 0) return img;
  for (std::size_t r = 0; r < height; ++r) {
    const std::size_t src_row = height - 1 - r;
    for (std::size_t c = 0; c < width; ++c) {
      const double level = std::round(255.0 * (resized(src_row, c) - low) / span);
      const auto px = static_cast<std::uint8_t>(std::clamp(level, 0.0, 255.0));
      for (std::size_t ch = 0; ch < channels; ++ch) img.pixels[(r * width + c) * channels + ch] = px;
    }
  }
  return img;
}

void write_pnm(const std::filesystem::path& path, const MelImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write image");
  out << (image.channels == 3 ? "P6" : "P5") << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw DataError(path.string() + ": image write failed");
}

MelImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open image");
  std::string magic;
  std::size_t width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (!in || (magic != "P5" && magic != "P6") || maxval != 255 || width == 0 || height == 0) {
    throw DataError(path.string() + ": not an 8-bit binary PGM/PPM image");
  }
  in.get();  // single whitespace after the header
  MelImage img;
  img.width = width;
  img.height = height;
  img.channels = magic == "P6" ? 3 : 1;
  img.pixels.resize(width * height * img.channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw DataError(path.string() + ": truncated image data");
  }
  return img;
}

}  // namespace eavit::dsp
