// pkrank/pairs.h

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

#ifndef PKRANK_PAIRS_H_
#define PKRANK_PAIRS_H_

#include <string>
#include <utility>
#include <vector>

#include "pkrank/audio.h"

namespace pkrank {

inline constexpr double kDefaultDelta = 0.3;

/// One homologous training pair.  Indices point into the SystemSet the pair
/// was built from; the ids are kept for manifests.
struct LabeledPair {
  std::string utterance_id;
  std::string system_a;
  std::string system_b;
  int utterance_index = -1;
  int system_a_index = -1;
  int system_b_index = -1;
  double mos_a = 0.0;
  double mos_b = 0.0;
  int target = 0;  // 1 when mos_a > mos_b

  bool operator==(const LabeledPair &other) const = default;
};

enum class Split { kTrain, kValidation };

struct PairSet {
  std::vector<LabeledPair> pairs;
  double delta = kDefaultDelta;
  Split split = Split::kTrain;

  size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// All ordered permutations (a, b) and (b, a) of homologous clips whose MOS
/// differ by more than delta.  Exact ties are dropped even at delta = 0.
/// Throws DataError when the set has no MOS and ConfigError for delta < 0.
PairSet BuildPairs(const SystemSet &set, double delta, Split split = Split::kTrain);

/// Utterance-level split.  The n_val_utts validation utterances are drawn by
/// a seeded shuffle; both halves keep the original utterance order.
std::pair<SystemSet, SystemSet> SplitValidation(const SystemSet &set, int n_val_utts,
                                                uint64_t seed);

/// Subset of utterances (columns) in the given order.
SystemSet SelectUtterances(const SystemSet &set, const std::vector<int> &indices);

/// Manifest CSV: utterance_id,system_a,system_b,mos_a,mos_b,target.
void WritePairManifest(const PairSet &pairs, const std::string &path);

/// Reads a manifest and resolves ids against `set`.  Throws DataError for
/// ids absent from the set.
PairSet ReadPairManifest(const std::string &path, const SystemSet &set);

}  // namespace pkrank

#endif  // PKRANK_PAIRS_H_
