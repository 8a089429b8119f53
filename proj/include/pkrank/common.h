// pkrank/common.h

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

#ifndef PKRANK_COMMON_H_
#define PKRANK_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pkrank {

/// Base of every error thrown by the library.  The CLI maps the two families
/// below onto exit codes: configuration/data problems exit with 2, numeric
/// failures with 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user configuration (counts, thresholds, flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing or inconsistent data (absent clip, missing MOS, misaligned ids).
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported file content.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

// Input too short for the requested transform (fewer samples than one
// window, fewer frames than the network's total stride).
class TooShortError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

// A constant input vector makes a correlation coefficient undefined.
class UndefinedCorrelationError : public DataError {
 public:
  using DataError::DataError;
};

// External comparator violated the wire protocol.
class ProtocolError : public DataError {
 public:
  using DataError::DataError;
};

// External comparator process died, timed out or could not be started.
class EndpointError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// splitmix64 step; the building block of the seed splitter.
inline uint64_t SplitMix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed for a named subsystem from the single
/// user-visible seed, so adding a consumer never perturbs the others.
inline uint64_t DeriveSeed(uint64_t seed, std::string_view stream) {
  uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return SplitMix64(seed ^ SplitMix64(h));
}

/// Small portable generator.  std:: distributions are implementation-defined,
/// so all sampling in the library goes through this class to keep synthetic
/// corpora and shuffles identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t NextU64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double Uniform() { return (NextU64() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n).
  uint64_t Below(uint64_t n);

  // Standard normal (Box-Muller, no caching so the stream is stateless).
  double Gaussian();

  template <typename Container>
  void Shuffle(Container &c) {
    for (size_t i = c.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(Below(i));
      using std::swap;
      swap(c[i - 1], c[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace pkrank

#endif  // PKRANK_COMMON_H_
