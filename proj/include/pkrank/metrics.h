// pkrank/metrics.h

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

#ifndef PKRANK_METRICS_H_
#define PKRANK_METRICS_H_

#include <span>
#include <string>
#include <vector>

#include "pkrank/common.h"

namespace pkrank {

// All three throw ConfigError for mismatched or too-short (< 2) inputs and
// UndefinedCorrelationError when either vector is constant.

/// Pearson product-moment correlation.
double Lcc(std::span<const double> x, std::span<const double> y);

/// Spearman: Pearson correlation of mid-ranks.
double Srcc(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b, O(n log n) (sort plus merge-sort swap count).
double Krcc(std::span<const double> x, std::span<const double> y);

/// 1-based mid-ranks; tied values share the average of their positions.
std::vector<double> MidRanks(std::span<const double> x);

struct CorrelationReport {
  double lcc = 0.0;
  double srcc = 0.0;
  double krcc = 0.0;
  size_t n = 0;

  double Sum() const { return lcc + srcc + krcc; }
};

/// Correlations between per-system scores and reference mean MOS.  The two
/// sides are matched by system id; a missing or extra id is a DataError.
CorrelationReport CorrelationReportFor(const std::vector<std::string> &score_ids,
                                       const std::vector<double> &scores,
                                       const std::vector<std::string> &mos_ids,
                                       const std::vector<double> &mean_mos);

}  // namespace pkrank

#endif  // PKRANK_METRICS_H_
