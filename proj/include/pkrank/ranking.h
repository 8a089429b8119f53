// pkrank/ranking.h

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

#ifndef PKRANK_RANKING_H_
#define PKRANK_RANKING_H_

#include <optional>
#include <string>
#include <vector>

#include "pkrank/audio.h"
#include "pkrank/comparators.h"
#include "pkrank/metrics.h"

namespace pkrank {

enum class Strategy {
  kBinary,    // one whole point to the winner of each comparison
  kNonBinary  // score to the first system, 1 - score to the second
};

const char *StrategyName(Strategy s);  // "bs" / "nbs"
Strategy ParseStrategy(const std::string &text);

struct RankingResult {
  std::vector<std::string> system_ids;  // same order as the input set
  std::vector<double> scores;           // accumulated points per system
  std::vector<std::string> order;       // descending score, ties by id
  Strategy strategy = Strategy::kBinary;
  std::string comparator;
  long long comparisons = 0;

  // 1-based position of each system (parallel to system_ids).
  std::vector<int> Ranks() const;
};

/// K (K - 1) / 2 * M.
long long ExpectedComparisons(long long k, long long m);

/// Enumerates every unordered system pair (k < w) and every utterance,
/// comparing clip k against clip w.  Under kBinary a score above 0.5 gives
/// the point to k and anything else, including exactly 0.5, to w.
///
/// Cells are farmed out to `jobs` threads when the comparator is reentrant;
/// the per-cell contributions are summed afterwards in (k, w, i) order, so
/// the result does not depend on the thread count.  Throws ConfigError for
/// K < 2 or M < 1, DataError naming the first missing clip, and rethrows
/// the first comparator failure in cell order.
RankingResult EcsRank(const SystemSet &set, Comparator &cmp, Strategy strategy, int jobs = 1);

/// Appends the unprocessed inputs as one more system named "noisy".  Their
/// MOS is attached when known; a labelled set whose noisy MOS is unknown
/// loses its labels, since a partial MOS table cannot be ranked against.
/// Throws DataError when there are no noisy clips or they are already in.
SystemSet IncludeNoisySystem(const SystemSet &set);

/// CSV `system_id,score,rank`, in rank order.
std::string RankingCsv(const RankingResult &result);
void WriteRankingCsv(const RankingResult &result, const std::string &path);

/// JSON summary: strategy, comparator, counts, order and, when given, the
/// correlation report.
std::string RankingSummaryJson(const RankingResult &result,
                               const std::optional<CorrelationReport> &report = std::nullopt);

/// Correlation of the accumulated scores with the set's mean MOS.
CorrelationReport ReportAgainstMos(const RankingResult &result, const SystemSet &set);

}  // namespace pkrank

#endif  // PKRANK_RANKING_H_
