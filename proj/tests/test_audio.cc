// pkrank/tests/test_audio.cc

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

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "pkrank/audio.h"
#include "test_util.h"

using namespace pkrank;

TEST_CASE("wav round trip quantizes to 16 bits") {
  AudioClip c = testing::Tone(440.0, 0.1);
  const auto bytes = EncodeWav(c);
  CHECK(bytes.size() == 44 + 2 * c.size());
  const AudioClip back = ParseWav(bytes);
  REQUIRE(back.size() == c.size());
  CHECK(back.sample_rate_hz == 16000);
  for (size_t i = 0; i < c.size(); ++i)
    CHECK(std::abs(back.samples[i] - c.samples[i]) <= 0.5 / 32768.0 + 1e-9);
  // A decoded clip re-encodes to the same bytes.
  CHECK(EncodeWav(back) == bytes);
}

TEST_CASE("wav encoding clips out-of-range samples") {
  AudioClip c;
  c.samples = {1.5f, -1.5f, 1.0f, -1.0f, 0.0f};
  const AudioClip back = ParseWav(EncodeWav(c));
  CHECK(back.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[1] == -1.0f);
  CHECK(back.samples[2] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[3] == -1.0f);
  CHECK(back.samples[4] == 0.0f);
}

TEST_CASE("wav parser rejects bad containers") {
  CHECK_THROWS_AS(ParseWav({'R', 'I', 'F', 'F'}), FormatError);
  std::vector<uint8_t> junk(64, 'x');
  CHECK_THROWS_AS(ParseWav(junk), FormatError);

  AudioClip c = testing::Tone(100.0, 0.01);
  auto bytes = EncodeWav(c);
  bytes[22] = 2;  // channel count
  CHECK_THROWS_AS(ParseWav(bytes), UnsupportedFormatError);
  bytes = EncodeWav(c);
  bytes[34] = 8;  // bits per sample
  CHECK_THROWS_AS(ParseWav(bytes), UnsupportedFormatError);
  bytes = EncodeWav(c);
  bytes.resize(30);
  CHECK_THROWS_AS(ParseWav(bytes), FormatError);
  CHECK_THROWS_AS(ReadWav("/nonexistent/x.wav"), IoError);
}

TEST_CASE("wav file io") {
  testing::TempDir dir;
  AudioClip c = testing::Tone(300.0, 0.05, 8000);
  WriteWav(c, dir / "a.wav");
  const AudioClip back = ReadWav(dir / "a.wav");
  CHECK(back.sample_rate_hz == 8000);
  CHECK(back.size() == c.size());
}

TEST_CASE("resample length law and identity") {
  AudioClip c = testing::Tone(200.0, 0.1, 8000);  // 800 samples
  CHECK(Resample(c, 8000) == c);
  const AudioClip up = Resample(c, 16000);
  CHECK(up.size() == 1600);
  CHECK(up.sample_rate_hz == 16000);
  const AudioClip down = Resample(testing::Tone(200.0, 0.1, 44100), 16000);
  CHECK(down.size() == 1600);
  // A slow tone survives linear interpolation almost unchanged.  The final
  // output lies past the last input sample and holds its value.
  const AudioClip ref = testing::Tone(200.0, 0.1, 16000);
  double err = 0.0;
  for (size_t i = 0; i + 1 < ref.size(); ++i)
    err = std::max(err, std::abs(static_cast<double>(up.samples[i] - ref.samples[i])));
  CHECK(err < 0.01);
  CHECK_THROWS_AS(Resample(c, 500), ConfigError);
}

TEST_CASE("surrogate mos mapping") {
  CHECK(SurrogateMos(-5.0) == doctest::Approx(1.0));
  CHECK(SurrogateMos(30.0) == doctest::Approx(5.0));
  CHECK(SurrogateMos(12.5) == doctest::Approx(3.0));
  CHECK(SurrogateMos(-40.0) == 1.0);
  CHECK(SurrogateMos(80.0) == 5.0);
}

TEST_CASE("segmental snr") {
  const AudioClip c = testing::Tone(500.0, 0.2);
  // Identical signals hit the upper clamp.
  CHECK(SegmentalSnr(c.samples, c.samples) == doctest::Approx(35.0));
  // A uniformly scaled copy has a known per-frame SNR: error = 0.1 x.
  std::vector<float> scaled(c.samples);
  for (float &v : scaled) v *= 1.1f;
  CHECK(SegmentalSnr(c.samples, scaled) == doctest::Approx(20.0).epsilon(1e-4));
  std::vector<float> zeros(c.size(), 0.0f);
  CHECK(SegmentalSnr(c.samples, zeros) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK_THROWS_AS(SegmentalSnr(c.samples, std::vector<float>(10)), ShapeError);
  CHECK_THROWS_AS(SegmentalSnr(std::vector<float>(10), std::vector<float>(10)), TooShortError);
}

TEST_CASE("grades") {
  const auto g = DefaultGrades(6);
  REQUIRE(g.size() == 6);
  for (int j = 0; j < 6; ++j) CHECK(g[j].snr_db == doctest::Approx(30.0 - 6.0 * j));
  const auto p = ParseGrades("30,24:0.5,18");
  REQUIRE(p.size() == 3);
  CHECK(p[1].snr_db == 24.0);
  CHECK(p[1].lowpass_fraction.value() == 0.5);
  CHECK_FALSE(p[2].lowpass_fraction.has_value());
  CHECK_THROWS_AS(ParseGrades("30,,10"), ConfigError);
  CHECK_THROWS_AS(ParseGrades("30,abc"), ConfigError);
  CHECK_THROWS_AS(ParseGrades("30:1.5"), ConfigError);
}

TEST_CASE("synthetic system set") {
  const SystemSet s = SynthSystemSet(4, 5, 7, DefaultGrades(4));
  CHECK(s.system_ids == std::vector<std::string>{"sys01", "sys02", "sys03", "sys04"});
  CHECK(s.utterance_ids.front() == "utt0001");
  REQUIRE(s.mos.has_value());
  REQUIRE(s.noisy.has_value());
  REQUIRE(s.noisy_mos.has_value());
  CHECK_NOTHROW(s.Validate());
  for (size_t k = 0; k < 4; ++k)
    for (size_t i = 0; i < 5; ++i) {
      CHECK(s.clips[k][i].size() == 8000);
      const double m = (*s.mos)[k][i];
      CHECK(m >= 1.0);
      CHECK(m <= 5.0);
      // Cleaner grades score strictly higher on every utterance.
      if (k > 0) CHECK((*s.mos)[k - 1][i] > m);
    }
  for (size_t i = 0; i < 5; ++i) CHECK((*s.noisy_mos)[i] < (*s.mos)[3][i]);

  // Same seed, same set; another seed differs.
  CHECK(SynthSystemSet(4, 5, 7, DefaultGrades(4)) == s);
  CHECK_FALSE(SynthSystemSet(4, 5, 8, DefaultGrades(4)) == s);

  CHECK_THROWS_AS(SynthSystemSet(5, 5, 7, DefaultGrades(4)), ConfigError);
  CHECK_THROWS_AS(SynthSystemSet(2, 0, 7, DefaultGrades(2)), ConfigError);
}

TEST_CASE("synthetic rater noise perturbs labels only") {
  SynthOptions noisy_opts;
  noisy_opts.mos_noise_std = 0.5;
  const SystemSet a = SynthSystemSet(3, 4, 1, DefaultGrades(3));
  const SystemSet b = SynthSystemSet(3, 4, 1, DefaultGrades(3), noisy_opts);
  CHECK(a.clips == b.clips);
  CHECK_FALSE(*a.mos == *b.mos);
}

TEST_CASE("system set save and load") {
  testing::TempDir dir;
  SystemSet s = SynthSystemSet(3, 4, 11, DefaultGrades(3));
  SaveSystemSet(s, dir.path());
  REQUIRE(s.clip_paths.has_value());

  int rows = 0;
  std::ifstream is(dir / "mos.csv");
  for (std::string line; std::getline(is, line);) ++rows;
  CHECK(rows == 1 + 3 * 4);

  const SystemSet back = LoadSystemSet(dir.path());
  CHECK(back.system_ids == s.system_ids);
  CHECK(back.utterance_ids == s.utterance_ids);
  REQUIRE(back.mos.has_value());
  REQUIRE(back.noisy.has_value());
  REQUIRE(back.noisy_mos.has_value());
  for (size_t k = 0; k < 3; ++k)
    for (size_t i = 0; i < 4; ++i) {
      CHECK((*back.mos)[k][i] == doctest::Approx((*s.mos)[k][i]).epsilon(1e-6));
      CHECK(back.clips[k][i] == ParseWav(EncodeWav(s.clips[k][i])));
    }
  CHECK(back.clip_paths.has_value());
}

TEST_CASE("load resamples and reports missing cells") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "a");
  std::filesystem::create_directories(dir / "b");
  WriteWav(testing::Tone(200.0, 0.1, 8000), dir / "a/u1.wav");
  WriteWav(testing::Tone(200.0, 0.1, 16000), dir / "b/u1.wav");
  SystemSet s = LoadSystemSet(dir.path());
  CHECK(s.clips[0][0].sample_rate_hz == 16000);
  CHECK(s.clips[0][0].size() == 1600);
  CHECK_FALSE(s.mos.has_value());
  CHECK_THROWS_AS(s.MeanMos(), DataError);

  WriteWav(testing::Tone(200.0, 0.1), dir / "a/u2.wav");
  CHECK_THROWS_AS(LoadSystemSet(dir.path()), DataError);
  CHECK_THROWS_AS(LoadSystemSet(dir / "nope"), IoError);
}

TEST_CASE("validate names the empty cell") {
  SystemSet s = SynthSystemSet(2, 2, 3, DefaultGrades(2));
  s.clips[1][0].samples.clear();
  try {
    s.Validate();
    FAIL("expected DataError");
  } catch (const DataError &e) {
    const std::string msg = e.what();
    CHECK(msg.find("sys02") != std::string::npos);
    CHECK(msg.find("utt0001") != std::string::npos);
  }
}
