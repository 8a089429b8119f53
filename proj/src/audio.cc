// pkrank/audio.cc

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

#include "pkrank/audio.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <set>

#include "text_util.h"

namespace pkrank {

namespace fs = std::filesystem;

namespace {

uint32_t ReadLe32(const uint8_t *p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t ReadLe16(const uint8_t *p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void PutLe32(std::vector<uint8_t> &out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void PutLe16(std::vector<uint8_t> &out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void PutTag(std::vector<uint8_t> &out, const char *tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

AudioClip ParseWav(const std::vector<uint8_t> &bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file");

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t *data = nullptr;
  size_t data_size = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t *chunk = bytes.data() + pos;
    const uint32_t size = ReadLe32(chunk + 4);
    const size_t body = pos + 8;
    if (size > bytes.size() - body) {
      // Some writers leave a bogus size on the final data chunk; accept what
      // is there, but only for data.
      if (std::memcmp(chunk, "data", 4) != 0)
        throw FormatError("truncated chunk in WAVE file");
    }
    const size_t avail = std::min<size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError("fmt chunk too short");
      format = ReadLe16(chunk + 8);
      channels = ReadLe16(chunk + 10);
      rate = ReadLe32(chunk + 12);
      bits = ReadLe16(chunk + 22);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw FormatError("WAVE file has no fmt chunk");
  if (data == nullptr) throw FormatError("WAVE file has no data chunk");
  if (format != 1 || bits != 16)
    throw UnsupportedFormatError("only PCM 16-bit WAVE is supported (format " +
                                 std::to_string(format) + ", " +
                                 std::to_string(bits) + " bits)");
  if (channels != 1)
    throw UnsupportedFormatError("only mono WAVE is supported (" +
                                 std::to_string(channels) + " channels)");
  if (rate == 0) throw FormatError("WAVE sample rate is zero");

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(rate);
  const size_t n = data_size / 2;
  clip.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const auto v = static_cast<int16_t>(ReadLe16(data + 2 * i));
    clip.samples[i] = static_cast<float>(v / 32768.0);
  }
  return clip;
}

std::vector<uint8_t> EncodeWav(const AudioClip &clip) {
  if (clip.sample_rate_hz <= 0) throw ConfigError("sample rate must be positive");
  const uint32_t data_bytes = static_cast<uint32_t>(clip.samples.size() * 2);
  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  PutTag(out, "RIFF");
  PutLe32(out, 36 + data_bytes);
  PutTag(out, "WAVE");
  PutTag(out, "fmt ");
  PutLe32(out, 16);
  PutLe16(out, 1);  // PCM
  PutLe16(out, 1);  // mono
  PutLe32(out, static_cast<uint32_t>(clip.sample_rate_hz));
  PutLe32(out, static_cast<uint32_t>(clip.sample_rate_hz) * 2);
  PutLe16(out, 2);
  PutLe16(out, 16);
  PutTag(out, "data");
  PutLe32(out, data_bytes);
  for (float s : clip.samples) {
    double x = std::isfinite(s) ? std::clamp<double>(s, -1.0, 1.0) : 0.0;
    long q = std::lround(x * 32768.0);
    q = std::clamp<long>(q, -32768, 32767);
    PutLe16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  return out;
}

AudioClip ReadWav(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
  try {
    return ParseWav(bytes);
  } catch (const UnsupportedFormatError &e) {
    throw UnsupportedFormatError(path + ": " + e.what());
  } catch (const FormatError &e) {
    throw FormatError(path + ": " + e.what());
  }
}

void WriteWav(const AudioClip &clip, const std::string &path) {
  const auto bytes = EncodeWav(clip);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os.write(reinterpret_cast<const char *>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path);
}

AudioClip Resample(const AudioClip &clip, int target_hz) {
  if (target_hz < 1000) throw ConfigError("resample target must be >= 1000 Hz");
  if (clip.sample_rate_hz <= 0) throw ConfigError("source sample rate must be positive");
  if (target_hz == clip.sample_rate_hz) return clip;

  const size_t in_len = clip.samples.size();
  const double ratio = static_cast<double>(target_hz) / clip.sample_rate_hz;
  const auto out_len = static_cast<size_t>(std::llround(in_len * ratio));
  AudioClip out;
  out.sample_rate_hz = target_hz;
  out.samples.resize(out_len);
  if (in_len == 0) return out;
  const double step = static_cast<double>(clip.sample_rate_hz) / target_hz;
  for (size_t j = 0; j < out_len; ++j) {
    const double t = j * step;
    size_t i0 = static_cast<size_t>(t);
    if (i0 >= in_len - 1) {
      out.samples[j] = clip.samples[in_len - 1];
      continue;
    }
    const double frac = t - i0;
    const double a = clip.samples[i0], b = clip.samples[i0 + 1];
    out.samples[j] = static_cast<float>(a + frac * (b - a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus.

double SegmentalSnr(const std::vector<float> &clean,
                    const std::vector<float> &degraded, int frame_len) {
  if (clean.size() != degraded.size())
    throw ShapeError("segmental SNR needs equal-length signals");
  if (frame_len <= 0) throw ConfigError("frame length must be positive");
  const size_t n_frames = clean.size() / frame_len;
  if (n_frames == 0) throw TooShortError("signal shorter than one SNR frame");

  std::vector<double> sig(n_frames), err(n_frames);
  double max_sig = 0.0;
  for (size_t f = 0; f < n_frames; ++f) {
    double s = 0.0, e = 0.0;
    for (int j = 0; j < frame_len; ++j) {
      const size_t idx = f * frame_len + j;
      const double c = clean[idx];
      const double d = degraded[idx] - c;
      s += c * c;
      e += d * d;
    }
    sig[f] = s;
    err[f] = e;
    max_sig = std::max(max_sig, s);
  }
  const double gate = max_sig * 1e-4;  // -40 dB
  double total = 0.0;
  size_t used = 0;
  for (size_t f = 0; f < n_frames; ++f) {
    if (sig[f] <= gate || sig[f] == 0.0) continue;
    double snr = 10.0 * std::log10(sig[f] / std::max(err[f], 1e-20));
    total += std::clamp(snr, -10.0, 35.0);
    ++used;
  }
  if (used == 0) return -10.0;
  return total / used;
}

double SurrogateMos(double snr_seg_db) {
  const double m =
      1.0 + 4.0 * (snr_seg_db - kSurrogateSnrLo) / (kSurrogateSnrHi - kSurrogateSnrLo);
  return std::clamp(m, 1.0, 5.0);
}

namespace {

double Rms(const std::vector<double> &x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / std::max<size_t>(x.size(), 1));
}

// Voiced harmonic source with formant shaping, a syllabic envelope with
// near-silent gaps and some fricative-like high-band noise.
std::vector<double> SpeechLikeSignal(size_t len, int fs, Rng &rng) {
  using std::numbers::pi;
  const double f0 = rng.Uniform(100.0, 220.0);
  const double glide_rate = rng.Uniform(0.4, 1.2);
  const double glide_phase = rng.Uniform(0.0, 2 * pi);
  const double f1 = rng.Uniform(400.0, 900.0);
  const double f2 = rng.Uniform(1000.0, 2500.0);
  const double syl_rate = rng.Uniform(3.0, 5.0);
  const double syl_phase = rng.Uniform(0.0, 2 * pi);
  const double fric_phase = rng.Uniform(0.0, 2 * pi);

  std::vector<double> out(len, 0.0);
  double phase = 0.0;
  double prev_noise = 0.0;
  for (size_t n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) / fs;
    const double f = f0 * (1.0 + 0.08 * std::sin(2 * pi * glide_rate * t + glide_phase));
    phase += 2 * pi * f / fs;
    double voiced = 0.0;
    for (int h = 1; h <= 24; ++h) {
      const double fh = h * f;
      if (fh >= 0.45 * fs) break;
      const double w = 1.0 + 2.0 * std::exp(-std::pow((fh - f1) / 150.0, 2)) +
                       1.5 * std::exp(-std::pow((fh - f2) / 250.0, 2));
      voiced += w / h * std::sin(h * phase);
    }
    const double env = std::pow(std::max(0.0, std::sin(2 * pi * syl_rate * t + syl_phase)), 0.7);
    const double white = rng.Uniform(-1.0, 1.0);
    const double fric = white - prev_noise;  // first difference: high-band
    prev_noise = white;
    const double fenv =
        std::pow(std::max(0.0, std::sin(2 * pi * syl_rate * t + fric_phase)), 4.0);
    out[n] = env * voiced + 0.3 * fenv * fric;
  }
  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double &v : out) v *= 0.5 / peak;
  return out;
}

// Stationary coloured noise with unit RMS: a random mix of white and
// one-pole lowpassed noise.
std::vector<double> ColouredNoise(size_t len, Rng &rng) {
  const double mix = rng.Uniform(0.2, 0.8);
  std::vector<double> white(len), low(len);
  double y = 0.0;
  for (size_t n = 0; n < len; ++n) {
    white[n] = rng.Gaussian();
    y = 0.95 * y + white[n];
    low[n] = y;
  }
  const double lw = Rms(low);
  std::vector<double> out(len);
  for (size_t n = 0; n < len; ++n)
    out[n] = mix * white[n] + (1.0 - mix) * (lw > 0.0 ? low[n] / lw : 0.0);
  const double r = Rms(out);
  if (r > 0.0)
    for (double &v : out) v /= r;
  return out;
}

// Zero-phase windowed-sinc lowpass; cutoff as a fraction of Nyquist.
std::vector<double> Lowpass(const std::vector<double> &x, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("lowpass fraction must lie in (0, 1]");
  if (fraction >= 1.0) return x;
  constexpr int kHalf = 32;
  const double fc = 0.5 * fraction;  // cycles per sample
  std::vector<double> taps(2 * kHalf + 1);
  double sum = 0.0;
  for (int j = -kHalf; j <= kHalf; ++j) {
    const double sinc = j == 0 ? 2 * fc
                               : std::sin(2 * std::numbers::pi * fc * j) / (std::numbers::pi * j);
    const double win = 0.54 + 0.46 * std::cos(std::numbers::pi * j / kHalf);
    taps[j + kHalf] = sinc * win;
    sum += taps[j + kHalf];
  }
  for (double &t : taps) t /= sum;
  std::vector<double> y(x.size(), 0.0);
  const auto n = static_cast<long>(x.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = -kHalf; j <= kHalf; ++j) {
      const long k = i - j;
      if (k >= 0 && k < n) acc += taps[j + kHalf] * x[k];
    }
    y[i] = acc;
  }
  return y;
}

std::vector<float> ToClippedFloat(const std::vector<double> &x) {
  std::vector<float> out(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    out[i] = static_cast<float>(std::clamp(x[i], -1.0, 1.0));
  return out;
}

std::string NumberedId(const char *prefix, int index, int width) {
  std::string digits = std::to_string(index);
  if (static_cast<int>(digits.size()) < width)
    digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

}  // namespace

std::vector<DegradationGrade> DefaultGrades(int k) {
  if (k < 1) throw ConfigError("need at least one grade");
  std::vector<DegradationGrade> grades(k);
  for (int j = 0; j < k; ++j)
    grades[j].snr_db = k == 1 ? 30.0 : 30.0 - 30.0 * j / (k - 1);
  return grades;
}

std::vector<DegradationGrade> ParseGrades(const std::string &text) {
  std::vector<DegradationGrade> grades;
  for (const auto &item : internal::SplitFields(text)) {
    if (item.empty()) throw ConfigError("empty grade in '" + text + "'");
    DegradationGrade g;
    auto colon = item.find(':');
    try {
      g.snr_db = internal::ParseDouble(item.substr(0, colon), "grade SNR");
      if (colon != std::string::npos) {
        g.lowpass_fraction =
            internal::ParseDouble(item.substr(colon + 1), "lowpass fraction");
      }
    } catch (const FormatError &e) {
      throw ConfigError(e.what());
    }
    if (g.lowpass_fraction && !(*g.lowpass_fraction > 0.0 && *g.lowpass_fraction <= 1.0))
      throw ConfigError("lowpass fraction must lie in (0, 1]: " + item);
    grades.push_back(g);
  }
  return grades;
}

SystemSet SynthSystemSet(int k, int m, uint64_t seed,
                         const std::vector<DegradationGrade> &grades,
                         const SynthOptions &opts) {
  if (k < 1 || m < 1) throw ConfigError("synth needs k >= 1 and m >= 1");
  if (static_cast<size_t>(k) != grades.size())
    throw ConfigError("synth: k = " + std::to_string(k) + " but " +
                      std::to_string(grades.size()) + " grades given");
  if (opts.sample_rate_hz < 1000) throw ConfigError("synth sample rate must be >= 1000");
  const auto len = static_cast<size_t>(std::llround(opts.duration_s * opts.sample_rate_hz));
  if (len < 512) throw ConfigError("synth duration too short");
  for (const auto &g : grades)
    if (g.lowpass_fraction && !(*g.lowpass_fraction > 0.0 && *g.lowpass_fraction <= 1.0))
      throw ConfigError("lowpass fraction must lie in (0, 1]");

  double worst_snr = grades[0].snr_db;
  for (const auto &g : grades) worst_snr = std::min(worst_snr, g.snr_db);
  const double noisy_snr = worst_snr - 5.0;

  SystemSet set;
  for (int j = 0; j < k; ++j) set.system_ids.push_back(NumberedId("sys", j + 1, 2));
  for (int i = 0; i < m; ++i) set.utterance_ids.push_back(NumberedId("utt", i + 1, 4));
  set.clips.assign(k, std::vector<AudioClip>(m));
  set.mos.emplace(k, std::vector<double>(m));
  set.noisy.emplace(m);
  set.noisy_mos.emplace(m);

  Rng rater(DeriveSeed(seed, "synth/rater"));
  for (int i = 0; i < m; ++i) {
    Rng rng(DeriveSeed(seed, "synth/utt/" + std::to_string(i)));
    const auto clean = SpeechLikeSignal(len, opts.sample_rate_hz, rng);
    const auto noise = ColouredNoise(len, rng);
    const double clean_rms = Rms(clean);
    std::vector<float> clean_f(clean.begin(), clean.end());

    auto mix = [&](double snr_db) {
      const double gain = clean_rms / std::pow(10.0, snr_db / 20.0);
      std::vector<double> y(len);
      for (size_t n = 0; n < len; ++n) y[n] = clean[n] + gain * noise[n];
      return y;
    };

    AudioClip noisy{ToClippedFloat(mix(noisy_snr)), opts.sample_rate_hz};
    (*set.noisy_mos)[i] = SurrogateMos(SegmentalSnr(clean_f, noisy.samples));
    (*set.noisy)[i] = std::move(noisy);

    for (int j = 0; j < k; ++j) {
      auto y = mix(grades[j].snr_db);
      if (grades[j].lowpass_fraction) y = Lowpass(y, *grades[j].lowpass_fraction);
      AudioClip out{ToClippedFloat(y), opts.sample_rate_hz};
      double mos = SurrogateMos(SegmentalSnr(clean_f, out.samples));
      if (opts.mos_noise_std > 0.0)
        mos = std::clamp(mos + opts.mos_noise_std * rater.Gaussian(), 1.0, 5.0);
      (*set.mos)[j][i] = mos;
      set.clips[j][i] = std::move(out);
    }
  }
  return set;
}

// ---------------------------------------------------------------------------

std::vector<double> SystemSet::MeanMos() const {
  if (!mos) throw DataError("system set has no MOS labels");
  std::vector<double> out;
  for (const auto &row : *mos) {
    double s = 0.0;
    for (double v : row) s += v;
    out.push_back(row.empty() ? 0.0 : s / row.size());
  }
  return out;
}

void SystemSet::Validate() const {
  const size_t k = system_ids.size(), m = utterance_ids.size();
  if (clips.size() != k) throw DataError("clip grid has wrong number of systems");
  for (size_t s = 0; s < k; ++s) {
    if (clips[s].size() != m)
      throw DataError("system " + system_ids[s] + " has " +
                      std::to_string(clips[s].size()) + " clips, expected " +
                      std::to_string(m));
    for (size_t i = 0; i < m; ++i)
      if (clips[s][i].empty())
        throw DataError("missing clip for system " + system_ids[s] +
                        ", utterance " + utterance_ids[i]);
  }
  if (mos) {
    if (mos->size() != k) throw DataError("MOS grid has wrong number of systems");
    for (size_t s = 0; s < k; ++s) {
      if ((*mos)[s].size() != m) throw DataError("MOS row has wrong length");
      for (size_t i = 0; i < m; ++i) {
        const double v = (*mos)[s][i];
        if (!(v >= 1.0 && v <= 5.0))
          throw DataError("MOS out of [1, 5] for system " + system_ids[s] +
                          ", utterance " + utterance_ids[i]);
      }
    }
  }
  if (noisy && noisy->size() != m) throw DataError("noisy list has wrong length");
  if (noisy_mos && noisy_mos->size() != m) throw DataError("noisy MOS has wrong length");
}

SystemSet LoadSystemSet(const std::string &root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root);

  std::vector<std::string> systems;
  for (const auto &entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const auto name = entry.path().filename().string();
    if (name == kNoisySystemId || name.starts_with('.')) continue;
    systems.push_back(name);
  }
  std::sort(systems.begin(), systems.end());
  if (systems.empty()) throw DataError("no system directories under " + root);

  auto list_wavs = [](const fs::path &dir) {
    std::vector<std::string> ids;
    for (const auto &entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".wav")
        ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    return ids;
  };

  auto load = [](const fs::path &p) {
    AudioClip c = ReadWav(p.string());
    if (c.sample_rate_hz != kCanonicalRateHz) c = Resample(c, kCanonicalRateHz);
    return c;
  };

  SystemSet set;
  set.system_ids = systems;
  set.utterance_ids = list_wavs(fs::path(root) / systems[0]);
  if (set.utterance_ids.empty()) throw DataError("no wav files under " + systems[0]);
  const size_t k = systems.size(), m = set.utterance_ids.size();
  set.clips.assign(k, std::vector<AudioClip>(m));
  set.clip_paths.emplace(k, std::vector<std::string>(m));
  for (size_t s = 0; s < k; ++s) {
    const auto ids = list_wavs(fs::path(root) / systems[s]);
    if (ids != set.utterance_ids) {
      for (size_t i = 0; i < m; ++i)
        if (!std::binary_search(ids.begin(), ids.end(), set.utterance_ids[i]))
          throw DataError("missing clip for system " + systems[s] + ", utterance " +
                          set.utterance_ids[i]);
      throw DataError("system " + systems[s] + " has extra utterances");
    }
    for (size_t i = 0; i < m; ++i) {
      const auto p = fs::path(root) / systems[s] / (set.utterance_ids[i] + ".wav");
      set.clips[s][i] = load(p);
      (*set.clip_paths)[s][i] = p.string();
    }
  }

  const auto noisy_dir = fs::path(root) / kNoisySystemId;
  if (fs::is_directory(noisy_dir)) {
    set.noisy.emplace();
    set.noisy_paths.emplace();
    for (const auto &u : set.utterance_ids) {
      const auto p = noisy_dir / (u + ".wav");
      if (!fs::exists(p)) throw DataError("missing noisy clip for utterance " + u);
      set.noisy->push_back(load(p));
      set.noisy_paths->push_back(p.string());
    }
  }

  std::map<std::string, size_t> sys_index, utt_index;
  for (size_t s = 0; s < k; ++s) sys_index[systems[s]] = s;
  for (size_t i = 0; i < m; ++i) utt_index[set.utterance_ids[i]] = i;

  const auto mos_path = fs::path(root) / "mos.csv";
  if (fs::exists(mos_path)) {
    std::vector<std::vector<double>> mos(k, std::vector<double>(m, -1.0));
    for (const auto &row :
         internal::ReadCsv(mos_path.string(), {"system_id", "utterance_id", "mos"})) {
      auto si = sys_index.find(row[0]);
      auto ui = utt_index.find(row[1]);
      if (si == sys_index.end() || ui == utt_index.end())
        throw DataError("mos.csv names unknown cell " + row[0] + "/" + row[1]);
      mos[si->second][ui->second] = internal::ParseDouble(row[2], "mos");
    }
    for (size_t s = 0; s < k; ++s)
      for (size_t i = 0; i < m; ++i)
        if (mos[s][i] < 0.0)
          throw DataError("mos.csv lacks system " + systems[s] + ", utterance " +
                          set.utterance_ids[i]);
    set.mos = std::move(mos);
  }

  const auto noisy_mos_path = fs::path(root) / "noisy_mos.csv";
  if (set.noisy && fs::exists(noisy_mos_path)) {
    std::vector<double> nm(m, -1.0);
    for (const auto &row : internal::ReadCsv(noisy_mos_path.string(), {"utterance_id", "mos"})) {
      auto ui = utt_index.find(row[0]);
      if (ui == utt_index.end()) throw DataError("noisy_mos.csv names unknown utterance " + row[0]);
      nm[ui->second] = internal::ParseDouble(row[1], "mos");
    }
    if (std::find(nm.begin(), nm.end(), -1.0) == nm.end()) set.noisy_mos = std::move(nm);
  }

  set.Validate();
  return set;
}

void SaveSystemSet(SystemSet &set, const std::string &root) {
  set.Validate();
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root + ": " + ec.message());
  const size_t k = set.num_systems(), m = set.num_utterances();
  set.clip_paths.emplace(k, std::vector<std::string>(m));
  for (size_t s = 0; s < k; ++s) {
    const auto dir = fs::path(root) / set.system_ids[s];
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string());
    for (size_t i = 0; i < m; ++i) {
      const auto p = (dir / (set.utterance_ids[i] + ".wav")).string();
      WriteWav(set.clips[s][i], p);
      (*set.clip_paths)[s][i] = p;
    }
  }
  if (set.noisy) {
    const auto dir = fs::path(root) / kNoisySystemId;
    fs::create_directories(dir, ec);
    set.noisy_paths.emplace();
    for (size_t i = 0; i < m; ++i) {
      const auto p = (dir / (set.utterance_ids[i] + ".wav")).string();
      WriteWav((*set.noisy)[i], p);
      set.noisy_paths->push_back(p);
    }
  }
  if (set.mos) {
    std::ofstream os(fs::path(root) / "mos.csv", std::ios::trunc);
    if (!os) throw IoError("cannot write mos.csv under " + root);
    os << "system_id,utterance_id,mos\n";
    for (size_t s = 0; s < k; ++s)
      for (size_t i = 0; i < m; ++i)
        os << set.system_ids[s] << ',' << set.utterance_ids[i] << ','
           << internal::FormatDouble((*set.mos)[s][i]) << '\n';
  }
  if (set.noisy && set.noisy_mos) {
    std::ofstream os(fs::path(root) / "noisy_mos.csv", std::ios::trunc);
    if (!os) throw IoError("cannot write noisy_mos.csv under " + root);
    os << "utterance_id,mos\n";
    for (size_t i = 0; i < m; ++i)
      os << set.utterance_ids[i] << ',' << internal::FormatDouble((*set.noisy_mos)[i]) << '\n';
  }
}

}  // namespace pkrank
