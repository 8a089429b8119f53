// pkrank/features.cc

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

#include "pkrank/features.h"

#include <algorithm>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>

namespace pkrank {

namespace {

using Complex = std::complex<double>;

bool IsPowerOfTwo(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT.
void Fft(std::vector<Complex> &x) {
  const size_t n = x.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const Complex wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      Complex w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const Complex u = x[i + k];
        const Complex v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Plain DFT for sizes that are not a power of two.
void Dft(std::vector<Complex> &x) {
  const size_t n = x.size();
  std::vector<Complex> out(n);
  for (size_t k = 0; k < n; ++k) {
    Complex acc(0.0, 0.0);
    for (size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / n;
      acc += x[t] * Complex(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  x.swap(out);
}

std::vector<double> HannWindow(int win) {
  std::vector<double> w(win);
  for (int n = 0; n < win; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / win);
  return w;
}

Matrix StftPowerWithWindow(const AudioClip &clip, const StftConfig &cfg,
                           const std::vector<double> &window) {
  const int frames = cfg.NumFrames(clip.size());
  if (frames < 1)
    throw TooShortError("clip of " + std::to_string(clip.size()) +
                        " samples is shorter than one window (" +
                        std::to_string(cfg.win) + ")");
  const int bins = cfg.NumBins();
  Matrix power(frames, bins);
  std::vector<Complex> buf(cfg.n_fft);
  const bool radix2 = IsPowerOfTwo(cfg.n_fft);
  for (int t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), Complex(0.0, 0.0));
    const size_t start = static_cast<size_t>(t) * cfg.hop;
    for (int n = 0; n < cfg.win; ++n) buf[n] = clip.samples[start + n] * window[n];
    if (radix2)
      Fft(buf);
    else
      Dft(buf);
    for (int b = 0; b < bins; ++b) power(t, b) = std::norm(buf[b]);
  }
  return power;
}

// Area of a unit-height triangle (left, centre, right) lying below x.
double TriangleCumulative(double x, double l, double c, double r) {
  if (x <= l) return 0.0;
  if (x <= c) return (x - l) * (x - l) / (2.0 * (c - l));
  if (x <= r) return 0.5 * (c - l) + ((r - c) * (r - c) - (r - x) * (r - x)) / (2.0 * (r - c));
  return 0.5 * (r - l);
}

std::vector<double> MelEdgeFrequencies(int n_mels, int fs_hz) {
  const double mel_hi = HzToMel(fs_hz / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (int j = 0; j < n_mels + 2; ++j) edges[j] = MelToHz(mel_hi * j / (n_mels + 1));
  edges.front() = 0.0;
  edges.back() = fs_hz / 2.0;
  return edges;
}

}  // namespace

void StftConfig::Check() const {
  if (!(hop >= 1 && hop <= win && win <= n_fft))
    throw ConfigError("STFT config needs 1 <= hop <= win <= n_fft");
  if (!(floor_eps > 0.0)) throw ConfigError("floor_eps must be positive");
}

int StftConfig::NumFrames(size_t num_samples) const {
  if (num_samples < static_cast<size_t>(win)) return 0;
  return 1 + static_cast<int>((num_samples - win) / hop);
}

Matrix StftPower(const AudioClip &clip, const StftConfig &cfg) {
  cfg.Check();
  return StftPowerWithWindow(clip, cfg, HannWindow(cfg.win));
}

std::vector<double> MelCenterFrequencies(int n_mels, int fs_hz) {
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  auto edges = MelEdgeFrequencies(n_mels, fs_hz);
  return {edges.begin() + 1, edges.end() - 1};
}

Matrix MelFilterbank(int n_mels, int n_fft, int fs_hz) {
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
  if (n_fft < 2) throw ConfigError("n_fft must be >= 2");
  if (fs_hz <= 0) throw ConfigError("sample rate must be positive");
  const int bins = n_fft / 2 + 1;
  const double bin_hz = static_cast<double>(fs_hz) / n_fft;
  const auto edges = MelEdgeFrequencies(n_mels, fs_hz);
  Matrix fb(bins, n_mels);
  for (int j = 0; j < n_mels; ++j) {
    const double l = edges[j], c = edges[j + 1], r = edges[j + 2];
    const double area = 0.5 * (r - l);
    const int b_lo = std::max(0, static_cast<int>(std::floor(l / bin_hz - 0.5)));
    const int b_hi = std::min(bins - 1, static_cast<int>(std::ceil(r / bin_hz + 0.5)));
    for (int b = b_lo; b <= b_hi; ++b) {
      const double lo = (b - 0.5) * bin_hz, hi = (b + 0.5) * bin_hz;
      const double w = TriangleCumulative(hi, l, c, r) - TriangleCumulative(lo, l, c, r);
      if (w > 0.0) fb(b, j) = w / area;
    }
  }
  return fb;
}

LogMelExtractor::LogMelExtractor(const StftConfig &cfg, int n_mels, int fs_hz)
    : cfg_(cfg), n_mels_(n_mels), fs_hz_(fs_hz) {
  cfg_.Check();
  filterbank_ = MelFilterbank(n_mels, cfg.n_fft, fs_hz);
}

MelSpec LogMelExtractor::Compute(const AudioClip &clip) const {
  if (clip.sample_rate_hz != fs_hz_)
    throw DataError("clip is at " + std::to_string(clip.sample_rate_hz) +
                    " Hz, extractor expects " + std::to_string(fs_hz_) + " Hz");
  const Matrix power = StftPowerWithWindow(clip, cfg_, HannWindow(cfg_.win));
  MelSpec spec;
  spec.frames = power.rows;
  spec.n_mels = n_mels_;
  spec.frame_hop_s = static_cast<double>(cfg_.hop) / fs_hz_;
  spec.data.resize(static_cast<size_t>(power.rows) * n_mels_);
  const int bins = power.cols;
  std::vector<double> acc(n_mels_);
  for (int t = 0; t < power.rows; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int b = 0; b < bins; ++b) {
      const double p = power(t, b);
      if (p == 0.0) continue;
      const double *row = &filterbank_.data[static_cast<size_t>(b) * n_mels_];
      for (int j = 0; j < n_mels_; ++j) acc[j] += p * row[j];
    }
    for (int j = 0; j < n_mels_; ++j)
      spec.data[static_cast<size_t>(t) * n_mels_ + j] =
          static_cast<float>(std::log(acc[j] + cfg_.floor_eps));
  }
  return spec;
}

MelSpec LogMel(const AudioClip &clip, const StftConfig &cfg, int n_mels) {
  return LogMelExtractor(cfg, n_mels).Compute(clip);
}

namespace {
constexpr char kCacheMagic[4] = {'P', 'K', 'M', 'S'};
constexpr uint32_t kDtypeFloat32 = 1;

void PutU32(std::ostream &os, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char *>(b), 4);
}

uint32_t GetU32(const unsigned char *b) {
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
}  // namespace

void WriteFeatureCache(const MelSpec &spec, const std::string &path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os.write(kCacheMagic, 4);
  PutU32(os, static_cast<uint32_t>(spec.frames));
  PutU32(os, static_cast<uint32_t>(spec.n_mels));
  PutU32(os, kDtypeFloat32);
  for (float v : spec.data) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    PutU32(os, bits);
  }
  if (!os) throw IoError("write failed: " + path);
}

MelSpec ReadFeatureCache(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  unsigned char header[16];
  if (!is.read(reinterpret_cast<char *>(header), 16))
    throw FormatError(path + ": truncated feature header");
  if (std::memcmp(header, kCacheMagic, 4) != 0) throw FormatError(path + ": bad feature magic");
  if (GetU32(header + 12) != kDtypeFloat32)
    throw UnsupportedFormatError(path + ": unsupported feature dtype");
  MelSpec spec;
  spec.frames = static_cast<int>(GetU32(header + 4));
  spec.n_mels = static_cast<int>(GetU32(header + 8));
  const size_t n = static_cast<size_t>(spec.frames) * spec.n_mels;
  spec.data.resize(n);
  unsigned char b[4];
  for (size_t i = 0; i < n; ++i) {
    if (!is.read(reinterpret_cast<char *>(b), 4)) throw FormatError(path + ": truncated data");
    const uint32_t bits = GetU32(b);
    std::memcpy(&spec.data[i], &bits, 4);
  }
  return spec;
}

}  // namespace pkrank
