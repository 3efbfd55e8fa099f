#include "eavit/dsp/spectrogram.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "eavit/errors.h"

namespace eavit::dsp {
namespace {

constexpr double kPowerFloor = 1e-10;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// FFTW planning is not thread-safe; execution with new-array calls is.
class RealFft {
 public:
  static const RealFft& get(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, std::unique_ptr<RealFft>> cache;
    std::lock_guard lock(mutex);
    auto& slot = cache[n];
    if (!slot) slot.reset(new RealFft(n));
    return *slot;
  }

  ~RealFft() { fftw_destroy_plan(plan_); }

  // out receives n/2 + 1 complex bins.
  void run(double* in, fftw_complex* out) const { fftw_execute_dft_r2c(plan_, in, out); }

 private:
  explicit RealFft(std::size_t n) {
    std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
    std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(n / 2 + 1));
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  }

  fftw_plan plan_;
};

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

Matrix Spectrogram::power() const {
  Matrix out = magnitudes;
  for (double& v : out.values) v *= v;
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> make_window(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  if (kind == WindowKind::kHann) {
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
  }
  return w;
}

Spectrogram stft(const Segment& segment, std::size_t n_fft, std::size_t hop, WindowKind window) {
  if (!is_power_of_two(n_fft)) throw UsageError("n_fft " + std::to_string(n_fft) + " is not a power of two");
  if (hop == 0 || hop > n_fft) {
    throw UsageError("hop " + std::to_string(hop) + " outside (0, " + std::to_string(n_fft) + "]");
  }
  const std::size_t len = segment.samples.size();
  const std::size_t pad = n_fft / 2;
  if (len <= pad) {
    throw DataError("segment of " + std::to_string(len) + " samples too short for n_fft " +
                    std::to_string(n_fft));
  }

  // Reflect padding excludes the edge sample itself.
  std::vector<double> padded(len + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    padded[i] = segment.samples[pad - i];
    padded[pad + len + i] = segment.samples[len - 2 - i];
  }
  std::copy(segment.samples.begin(), segment.samples.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));

  const std::size_t frames = 1 + len / hop;
  const std::size_t bins = n_fft / 2 + 1;
  const auto win = make_window(window, n_fft);
  const RealFft& fft = RealFft::get(n_fft);

  std::unique_ptr<double, FftwFree> frame(fftw_alloc_real(n_fft));
  std::unique_ptr<fftw_complex, FftwFree> spectrum(fftw_alloc_complex(bins));

  Spectrogram out;
  out.magnitudes = Matrix(bins, frames);
  out.bin_hz = static_cast<double>(segment.sample_rate) / static_cast<double>(n_fft);
  out.hop_seconds = static_cast<double>(hop) / static_cast<double>(segment.sample_rate);
  for (std::size_t f = 0; f < frames; ++f) {
    const double* src = padded.data() + f * hop;
    for (std::size_t i = 0; i < n_fft; ++i) frame.get()[i] = src[i] * win[i];
    fft.run(frame.get(), spectrum.get());
    for (std::size_t k = 0; k < bins; ++k) {
      out.magnitudes(k, f) = std::hypot(spectrum.get()[k][0], spectrum.get()[k][1]);
    }
  }
  return out;
}

Matrix power_to_db(const Matrix& power, double top_db) {
  if (!(top_db > 0)) throw UsageError("top_db must be positive");
  double peak = kPowerFloor;
  for (double v : power.values) peak = std::max(peak, v);
  Matrix out(power.rows, power.cols);
  for (std::size_t i = 0; i < power.values.size(); ++i) {
    const double db = 10.0 * std::log10(std::max(power.values[i], kPowerFloor) / peak);
    out.values[i] = std::max(db, -top_db);
  }
  return out;
}

MelFilterBank mel_filterbank(std::size_t n_mels, std::size_t n_fft, double sample_rate, double fmin,
                             double fmax) {
  if (n_mels < 2) throw UsageError("n_mels must be at least 2");
  if (!(fmin >= 0 && fmin < fmax && fmax <= sample_rate / 2)) {
    throw UsageError("mel range [" + std::to_string(fmin) + ", " + std::to_string(fmax) +
                     "] invalid for sample rate " + std::to_string(sample_rate));
  }
  const std::size_t bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }

  MelFilterBank bank;
  bank.weights = Matrix(n_mels, bins);
  bank.fmin_hz = fmin;
  bank.fmax_hz = fmax;
  bank.n_mels = n_mels;
  bank.center_hz.assign(edges.begin() + 1, edges.end() - 1);
  const double bin_hz = sample_rate / static_cast<double>(n_fft);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    double peak = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double w = std::max(0.0, std::min((f - left) / (center - left), (right - f) / (right - center)));
      bank.weights(m, k) = w;
      peak = std::max(peak, w);
    }
    if (peak > 0) {
      for (std::size_t k = 0; k < bins; ++k) bank.weights(m, k) /= peak;
    } else {
      // Narrower than one bin: collapse onto the nearest bin.
      const auto k = std::min(bins - 1, static_cast<std::size_t>(std::llround(center / bin_hz)));
      bank.weights(m, k) = 1.0;
    }
  }
  return bank;
}

Matrix apply_mel(const Spectrogram& spectrogram, const MelFilterBank& bank) {
  const Matrix& mag = spectrogram.magnitudes;
  if (bank.weights.cols != mag.rows) {
    throw ShapeError("mel bank expects " + std::to_string(bank.weights.cols) + " bins, spectrogram has " +
                     std::to_string(mag.rows));
  }
  Matrix out(bank.n_mels, mag.cols);
  for (std::size_t m = 0; m < bank.n_mels; ++m) {
    for (std::size_t k = 0; k < mag.rows; ++k) {
      const double w = bank.weights(m, k);
      if (w == 0.0) continue;
      for (std::size_t f = 0; f < mag.cols; ++f) {
        const double a = mag(k, f);
        out(m, f) += w * a * a;
      }
    }
  }
  return out;
}

}  // namespace eavit::dsp
