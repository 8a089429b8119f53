// pkrank/features.h

// Copyright 2026  The pkrank Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef PKRANK_FEATURES_H_
#define PKRANK_FEATURES_H_

#include <cmath>
#include <string>
#include <vector>

#include "pkrank/audio.h"

namespace pkrank {

inline constexpr int kDefaultNumMels = 120;

struct StftConfig {
  int win = 512;
  int hop = 256;
  int n_fft = 512;
  double floor_eps = 1e-10;

  // Throws ConfigError unless 1 <= hop <= win <= n_fft and floor_eps > 0.
  void Check() const;
  int NumBins() const { return n_fft / 2 + 1; }
  // 1 + floor((L - win) / hop); zero when L < win.
  int NumFrames(size_t num_samples) const;
};

/// Row-major real matrix; rows are frames.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
  double &operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

/// T x N log-mel energies, row-major (frame-major).
struct MelSpec {
  int frames = 0;
  int n_mels = kDefaultNumMels;
  double frame_hop_s = 0.016;
  std::vector<float> data;

  float at(int t, int n) const { return data[static_cast<size_t>(t) * n_mels + n]; }
  bool operator==(const MelSpec &other) const = default;
};

inline double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Hann-windowed (periodic) frames, zero-padded to n_fft, squared magnitude
/// of bins 0..n_fft/2.  Throws TooShortError when L < win.
Matrix StftPower(const AudioClip &clip, const StftConfig &cfg);

/// (n_fft/2+1) x n_mels triangular filters equally spaced on the mel scale
/// from 0 Hz to fs/2.  Each filter's weight on a bin is the share of the
/// triangle's area that falls inside the bin's frequency interval, so every
/// filter sums to one even when it is narrower than a bin.
Matrix MelFilterbank(int n_mels, int n_fft, int fs_hz);

/// Centre frequency (Hz) of each filter built by MelFilterbank.
std::vector<double> MelCenterFrequencies(int n_mels, int fs_hz);

/// Precomputes window and filterbank for repeated extraction.
class LogMelExtractor {
 public:
  explicit LogMelExtractor(const StftConfig &cfg = {}, int n_mels = kDefaultNumMels,
                           int fs_hz = kCanonicalRateHz);

  /// log(power * filterbank + floor_eps), natural log.  The clip must be at
  /// the extractor's rate.
  MelSpec Compute(const AudioClip &clip) const;

  const StftConfig &config() const { return cfg_; }
  int n_mels() const { return n_mels_; }
  double SilenceFloor() const { return std::log(cfg_.floor_eps); }

 private:
  StftConfig cfg_;
  int n_mels_;
  int fs_hz_;
  Matrix filterbank_;
};

/// One-shot helper around LogMelExtractor.
MelSpec LogMel(const AudioClip &clip, const StftConfig &cfg = {},
               int n_mels = kDefaultNumMels);

/// Feature-cache file: 16-byte header ("PKMS", frames, n_mels, dtype code 1
/// = float32; little-endian uint32 each) then row-major float32 data.
void WriteFeatureCache(const MelSpec &spec, const std::string &path);
MelSpec ReadFeatureCache(const std::string &path);

}  // namespace pkrank

#endif  // PKRANK_FEATURES_H_
