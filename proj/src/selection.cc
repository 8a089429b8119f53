// pkrank/selection.cc

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

#include "pkrank/selection.h"

#include <limits>

namespace pkrank {

double CheckpointScore::Sum() const {
  return report ? report->Sum() : -std::numeric_limits<double>::infinity();
}

Selection SelectCheckpoint(const std::vector<Checkpoint> &checkpoints, const SystemSet &val_set,
                           Strategy strategy, const ComparatorFactory &factory, int jobs) {
  if (checkpoints.empty()) throw ConfigError("no checkpoints to select from");
  if (!val_set.mos) throw DataError("checkpoint selection needs a labelled validation set");

  Selection sel;
  for (size_t c = 0; c < checkpoints.size(); ++c) {
    CheckpointScore s;
    s.index = c;
    s.epoch = checkpoints[c].epoch;
    s.val_loss = checkpoints[c].val_loss;
    sel.scores.push_back(s);
  }
  if (checkpoints.size() == 1) return sel;

  const std::vector<double> mean_mos = val_set.MeanMos();
  for (size_t c = 0; c < checkpoints.size(); ++c) {
    std::unique_ptr<Comparator> cmp =
        factory ? factory(checkpoints[c])
                : std::make_unique<ModelComparator>(checkpoints[c].params);
    const RankingResult r = EcsRank(val_set, *cmp, strategy, jobs);
    try {
      sel.scores[c].report =
          CorrelationReportFor(r.system_ids, r.scores, val_set.system_ids, mean_mos);
    } catch (const UndefinedCorrelationError &) {
      sel.scores[c].report.reset();
    }
  }

  for (size_t c = 1; c < sel.scores.size(); ++c) {
    const CheckpointScore &cand = sel.scores[c];
    const CheckpointScore &best = sel.scores[sel.index];
    if (cand.Sum() > best.Sum() || (cand.Sum() == best.Sum() && cand.val_loss < best.val_loss))
      sel.index = c;
  }
  return sel;
}

}  // namespace pkrank
