#pragma once

#include <string>
#include <vector>

#include "smoa/common.hpp"
#include "smoa/rng.hpp"

namespace smoa {

// Row-major [f_bins × t_frames] grid of real values.
struct Spectrogram {
  int64_t f_bins = 0, t_frames = 0;
  std::vector<double> v;

  Spectrogram() = default;
  Spectrogram(int64_t f, int64_t t)
      : f_bins(f), t_frames(t), v(static_cast<size_t>(f * t), 0.0) {}
  double& at(int64_t f, int64_t t) { return v[static_cast<size_t>(f * t_frames + t)]; }
  double at(int64_t f, int64_t t) const { return v[static_cast<size_t>(f * t_frames + t)]; }
};

struct Dataset {
  int64_t n_classes = 0, f_bins = 0, t_frames = 0;
  std::vector<Spectrogram> samples;
  std::vector<int> labels;
  int64_t size() const { return static_cast<int64_t>(labels.size()); }
};

// Class templates are sums of time-frequency Gaussian blobs and linear
// frequency sweeps; samples add per-draw Gaussian noise on top.
struct Blob {
  double cf, ct, sf, st, amp;
};
struct Chirp {
  double f0, slope, width, amp;
};
struct ClassPattern {
  std::vector<Blob> blobs;
  std::vector<Chirp> chirps;
};

struct SyntheticTaskConfig {
  int64_t n_classes = 10;
  int64_t f_bins = 32, t_frames = 128;
  int64_t train_per_class = 200, test_per_class = 50;
  double noise_sigma = 0.5;
  uint64_t pattern_seed = 7;
};

// One pattern per class, derived only from pattern_seed. Patterns are
// checked pairwise distinct.
std::vector<ClassPattern> class_patterns(const SyntheticTaskConfig& cfg);

Spectrogram render_pattern(const ClassPattern& pat, int64_t f_bins, int64_t t_frames,
                           double noise_sigma, Rng& rng);

// Deterministic in (cfg, seed, test_split). Values are quantized to f32
// precision at generation time, so save/load round-trips are bit exact.
Dataset generate_dataset(const SyntheticTaskConfig& cfg, uint64_t seed, bool test_split);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace smoa
