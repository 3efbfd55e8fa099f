#include "eavit/dsp/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "eavit/errors.h"

namespace eavit::dsp {
namespace {

struct Style {
  double low_hz;        // lowest melody note
  double span_octaves;  // melody range
  double bpm;
  double beats_per_note;
  int harmonics;
  double harmonic_decay;  // amplitude ratio between successive partials
  double noise;
  double kick;   // low thump on strong beats
  double snare;  // noise burst on back beats
  double hat;    // short bright tick on every half beat
  double drive;  // tanh saturation gain, 0 = clean
  bool offbeat;  // accents between beats
  std::vector<int> scale;  // semitones within an octave
};

const std::vector<Style>& styles() {
  static const std::vector<Style> table = {
      // blues: slow shuffle, minor pentatonic with blue note, mid register
      {110, 1.5, 78, 1.0, 6, 0.65, 0.010, 0.5, 0.3, 0.1, 0.0, false, {0, 3, 5, 6, 7, 10}},
      // classical: no drums, high sustained major lines
      {262, 2.0, 60, 2.0, 3, 0.40, 0.002, 0.0, 0.0, 0.0, 0.0, false, {0, 2, 4, 5, 7, 9, 11}},
      // country: bright major, train beat
      {196, 1.5, 108, 1.0, 5, 0.55, 0.008, 0.5, 0.4, 0.3, 0.0, false, {0, 2, 4, 7, 9}},
      // disco: four on the floor with busy hats
      {220, 1.0, 122, 0.5, 4, 0.50, 0.008, 1.0, 0.5, 0.6, 0.0, true, {0, 2, 3, 5, 7, 10}},
      // hiphop: heavy low bass, sparse top
      {55, 1.0, 90, 2.0, 3, 0.35, 0.010, 1.2, 0.7, 0.2, 0.0, false, {0, 3, 5, 7, 10}},
      // jazz: wide fast lines, ride ticks, no kick
      {147, 2.5, 150, 0.5, 3, 0.45, 0.004, 0.1, 0.1, 0.5, 0.0, false, {0, 2, 3, 5, 7, 9, 10, 11}},
      // metal: distorted low riffs, fast loud drums, noisy
      {82, 1.0, 180, 0.5, 10, 0.85, 0.060, 0.9, 0.8, 0.4, 6.0, false, {0, 1, 3, 5, 7, 8}},
      // pop: high clean major hooks
      {330, 1.0, 116, 1.0, 4, 0.45, 0.006, 0.7, 0.5, 0.3, 0.0, false, {0, 2, 4, 7, 9}},
      // reggae: off-beat skank, low-mid register
      {98, 1.0, 74, 1.0, 5, 0.60, 0.006, 0.6, 0.2, 0.1, 0.0, true, {0, 2, 4, 5, 7, 9}},
      // rock: driven guitar register, steady drums
      {110, 1.5, 130, 1.0, 8, 0.75, 0.030, 0.8, 0.7, 0.3, 2.5, false, {0, 2, 3, 5, 7, 10}},
  };
  return table;
}

class Random {
 public:
  explicit Random(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  double normal() {
    const double u = std::max(uniform(), 1e-300), v = uniform();
    return std::sqrt(-2 * std::log(u)) * std::cos(2 * std::numbers::pi * v);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace

AudioClip synthesize_track(std::size_t genre, std::size_t track, double seconds, int sample_rate,
                           std::uint64_t seed) {
  if (seconds <= 0 || sample_rate <= 0) throw UsageError("synthetic track needs positive length and rate");
  const Style& style = styles()[genre % styles().size()];
  Random rng(seed * 0x9E3779B97F4A7C15ull + genre * 1000003ull + track * 7919ull + 1);

  const double sr = sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * sr));
  std::vector<double> x(n, 0.0);

  const double transpose = std::pow(2.0, rng.uniform(-2.0, 2.0) / 12.0);
  const double beat = 60.0 / (style.bpm * rng.uniform(0.94, 1.06));
  const double note_len = beat * style.beats_per_note;
  const double pi2 = 2 * std::numbers::pi;

  // Melody: random walk over the scale.
  const int steps = static_cast<int>(style.scale.size() * style.span_octaves);
  int position = static_cast<int>(rng.index(static_cast<std::size_t>(std::max(steps, 1))));
  for (double start = 0; start < seconds; start += note_len) {
    position = std::clamp(position + static_cast<int>(rng.index(5)) - 2, 0, std::max(steps - 1, 0));
    const int octave = position / static_cast<int>(style.scale.size());
    const int semitone = style.scale[static_cast<std::size_t>(position) % style.scale.size()] + 12 * octave;
    const double f0 = style.low_hz * transpose * std::pow(2.0, semitone / 12.0);
    const double level = rng.uniform(0.25, 0.4);
    const auto first = static_cast<std::size_t>(start * sr);
    const auto last = std::min(n, static_cast<std::size_t>((start + note_len) * sr));
    for (std::size_t i = first; i < last; ++i) {
      const double t = (static_cast<double>(i) - static_cast<double>(first)) / sr;
      const double env = std::min(1.0, t / 0.01) * std::exp(-1.5 * t / note_len);
      double tone = 0, amp = 1;
      for (int h = 1; h <= style.harmonics; ++h, amp *= style.harmonic_decay) {
        const double f = f0 * h;
        if (f >= 0.45 * sr) break;
        tone += amp * std::sin(pi2 * f * t);
      }
      x[i] += level * env * tone;
    }
  }

  // Percussion on the beat grid.
  for (std::size_t k = 0; k * beat * 0.5 < seconds; ++k) {
    const double onset = static_cast<double>(k) * beat * 0.5;
    const bool on_beat = k % 2 == 0;
    const std::size_t beat_index = k / 2;
    const auto first = static_cast<std::size_t>(onset * sr);
    double kick = 0, snare = 0;
    if (on_beat && (style.offbeat || beat_index % 2 == 0)) kick = style.kick;
    if (on_beat && beat_index % 2 == 1) snare = style.snare;
    if (!on_beat && style.offbeat) snare = 0.6 * style.snare + 0.2;
    const double hat = style.hat;
    const auto last = std::min(n, first + static_cast<std::size_t>(0.25 * sr));
    for (std::size_t i = first; i < last; ++i) {
      const double t = (static_cast<double>(i) - static_cast<double>(first)) / sr;
      double v = 0;
      if (kick > 0) v += kick * 0.6 * std::exp(-t / 0.06) * std::sin(pi2 * (50 + 80 * std::exp(-t / 0.02)) * t);
      if (snare > 0) v += snare * 0.3 * std::exp(-t / 0.05) * rng.normal();
      if (hat > 0 && t < 0.03) {
        v += hat * 0.15 * std::exp(-t / 0.008) * (rng.normal() * std::sin(pi2 * 7000 * t));
      }
      x[i] += v;
    }
  }

  for (auto& v : x) {
    v += style.noise * rng.normal();
    if (style.drive > 0) v = std::tanh(style.drive * v) / std::tanh(style.drive);
  }
  const double peak = std::max(1e-9, std::abs(*std::max_element(x.begin(), x.end(), [](double a, double b) {
    return std::abs(a) < std::abs(b);
  })));
  for (auto& v : x) v *= 0.8 / peak;

  AudioClip clip;
  clip.samples = std::move(x);
  clip.sample_rate = sample_rate;
  clip.label = static_cast<int>(genre);
  return clip;
}

void write_synthetic_corpus(const std::filesystem::path& root, const SyntheticCorpusOptions& options) {
  for (std::size_t g = 0; g < options.genres.size(); ++g) {
    const auto dir = root / options.genres[g];
    std::filesystem::create_directories(dir);
    for (std::size_t t = 0; t < options.tracks_per_genre; ++t) {
      const auto clip = synthesize_track(g, t, options.seconds, options.sample_rate, options.seed);
      char name[64];
      std::snprintf(name, sizeof name, ".%05zu.wav", t);
      write_wav(dir / (options.genres[g] + name), clip.samples, clip.sample_rate);
    }
  }
}

}  // namespace eavit::dsp
