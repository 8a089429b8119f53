// pkrank/audio.h

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

#ifndef PKRANK_AUDIO_H_
#define PKRANK_AUDIO_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pkrank/common.h"

namespace pkrank {

inline constexpr int kCanonicalRateHz = 16000;

/// Mono waveform, samples nominally in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate_hz = kCanonicalRateHz;

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double DurationSeconds() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
  bool operator==(const AudioClip &other) const = default;
};

/// K systems x M utterances.  clips[k][i] is system k's output for noisy
/// source i; every clip in column i was derived from the same noisy input.
struct SystemSet {
  std::vector<std::string> system_ids;
  std::vector<std::string> utterance_ids;
  std::vector<std::vector<AudioClip>> clips;
  // mos[k][i], each in [1, 5].
  std::optional<std::vector<std::vector<double>>> mos;
  // Unprocessed inputs, one per utterance.
  std::optional<std::vector<AudioClip>> noisy;
  // MOS of the unprocessed inputs, when known.
  std::optional<std::vector<double>> noisy_mos;
  // Source wav paths, filled by LoadSystemSet / SaveSystemSet.  Needed by
  // comparators that work on files rather than samples.
  std::optional<std::vector<std::vector<std::string>>> clip_paths;
  std::optional<std::vector<std::string>> noisy_paths;

  size_t num_systems() const { return system_ids.size(); }
  size_t num_utterances() const { return utterance_ids.size(); }
  bool has_mos() const { return mos.has_value(); }

  // Mean MOS per system over utterances.  Throws DataError without labels.
  std::vector<double> MeanMos() const;

  // Throws DataError naming the first offending (system, utterance) cell.
  void Validate() const;

  bool operator==(const SystemSet &other) const = default;
};

// Name under which the unprocessed inputs live on disk and, once
// IncludeNoisySystem has run, in the system list.
inline constexpr const char *kNoisySystemId = "noisy";

/// Reads a RIFF/WAVE file holding mono 16-bit PCM.  Samples are scaled by
/// 1/32768.  Throws FormatError on a malformed container and
/// UnsupportedFormatError for anything other than mono PCM-16.
AudioClip ReadWav(const std::string &path);

/// Writes mono 16-bit PCM, clipping to [-1, 1].
void WriteWav(const AudioClip &clip, const std::string &path);

/// In-memory variants used by the above and by tests.
AudioClip ParseWav(const std::vector<uint8_t> &bytes);
std::vector<uint8_t> EncodeWav(const AudioClip &clip);

/// Linear-interpolation resampling.  Output length is
/// round(L * target / source).  target_hz must be >= 1000.
AudioClip Resample(const AudioClip &clip, int target_hz);

/// One degradation grade of the synthetic corpus.
struct DegradationGrade {
  double snr_db = 20.0;
  // Lowpass cutoff as a fraction of Nyquist, in (0, 1].
  std::optional<double> lowpass_fraction;
};

struct SynthOptions {
  double duration_s = 0.5;
  int sample_rate_hz = kCanonicalRateHz;
  // Std-dev of Gaussian "rater" noise added to each surrogate MOS before
  // clamping to [1, 5].  Zero keeps labels a pure function of the signal.
  double mos_noise_std = 0.0;
};

/// Mean over voiced frames of the per-frame SNR (dB) of `degraded` against
/// `clean`, each frame clamped to [-10, 35].  Frames whose clean energy is
/// more than 40 dB below the loudest frame are skipped.
double SegmentalSnr(const std::vector<float> &clean,
                    const std::vector<float> &degraded, int frame_len = 256);

// Segmental-SNR range mapped linearly onto MOS [1, 5].
inline constexpr double kSurrogateSnrLo = -5.0;
inline constexpr double kSurrogateSnrHi = 30.0;

/// clamp(1 + 4 (snr - lo) / (hi - lo), 1, 5).
double SurrogateMos(double snr_seg_db);

/// Builds a K x M system set with known latent quality: M seeded speech-like
/// base signals, a noisy source per utterance and one output per grade.
/// Throws ConfigError when k != grades.size().
SystemSet SynthSystemSet(int k, int m, uint64_t seed,
                         const std::vector<DegradationGrade> &grades,
                         const SynthOptions &opts = {});

/// k grades evenly spaced from 30 dB down to 0 dB.
std::vector<DegradationGrade> DefaultGrades(int k);

/// Parses "30,24:0.5,18" (snr[:lowpass] items).
std::vector<DegradationGrade> ParseGrades(const std::string &text);

/// Directory layout: <root>/<system_id>/<utterance_id>.wav, optional
/// <root>/mos.csv (system_id,utterance_id,mos) and <root>/noisy/*.wav.
/// Clips at other rates are resampled to 16 kHz on load.
SystemSet LoadSystemSet(const std::string &root);
void SaveSystemSet(SystemSet &set, const std::string &root);

}  // namespace pkrank

#endif  // PKRANK_AUDIO_H_
