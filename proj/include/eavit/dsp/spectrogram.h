#pragma once

#include <cstddef>
#include <vector>

#include "eavit/dsp/audio.h"

namespace eavit::dsp {

// Row-major real matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

enum class WindowKind { kHann, kRectangular };

// |STFT| with frequency bins as rows and frames as columns.
struct Spectrogram {
  Matrix magnitudes;  // [n_fft/2 + 1, n_frames]
  double bin_hz = 0;
  double hop_seconds = 0;

  Matrix power() const;
};

struct MelFilterBank {
  Matrix weights;  // [n_mels, n_fft/2 + 1]
  std::vector<double> center_hz;
  double fmin_hz = 0;
  double fmax_hz = 0;
  std::size_t n_mels = 0;
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Periodic window of length n.
std::vector<double> make_window(WindowKind kind, std::size_t n);

// Frames are centred: the signal is reflect-padded by n_fft/2 on both sides,
// giving 1 + floor(len / hop) frames. Throws UsageError for a non power of two
// n_fft or a hop outside (0, n_fft], DataError when the segment is too short
// to reflect-pad.
Spectrogram stft(const Segment& segment, std::size_t n_fft, std::size_t hop,
                 WindowKind window = WindowKind::kHann);

// 10 log10(max(p, amin) / max(P)), floored at -top_db.
Matrix power_to_db(const Matrix& power, double top_db);

// Triangular filters whose peaks sit at n_mels points equally spaced on the
// mel scale between fmin and fmax. Every row is rescaled so its largest
// weight is exactly 1.
MelFilterBank mel_filterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate, double fmin,
                             double fmax);

// weights x |X|^2.
Matrix apply_mel(const Spectrogram& spectrogram, const MelFilterBank& bank);

}  // namespace eavit::dsp
