// pkrank/selection.h

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

#ifndef PKRANK_SELECTION_H_
#define PKRANK_SELECTION_H_

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "pkrank/model.h"
#include "pkrank/ranking.h"

namespace pkrank {

struct CheckpointScore {
  size_t index = 0;  // into the checkpoint list
  int epoch = 0;
  double val_loss = 0.0;
  // Empty when the ranking produced constant scores; such a checkpoint
  // counts as -infinity and loses to every defined one.
  std::optional<CorrelationReport> report;
  double Sum() const;
};

struct Selection {
  size_t index = 0;
  std::vector<CheckpointScore> scores;  // parallel to the checkpoint list
};

/// Makes the comparator used to rank the validation set for a checkpoint.
/// Tests substitute their own; the default wraps the parameters in a
/// ModelComparator.
using ComparatorFactory = std::function<std::unique_ptr<Comparator>(const Checkpoint &)>;

/// Ranks the validation set once per checkpoint and picks the one whose
/// LCC + SRCC + KRCC against mean MOS is highest; ties go to the lower
/// validation loss, then to the earlier list position.  A single checkpoint
/// is returned without ranking.  Throws ConfigError for an empty list and
/// DataError when the validation set has no MOS.
Selection SelectCheckpoint(const std::vector<Checkpoint> &checkpoints, const SystemSet &val_set,
                           Strategy strategy = Strategy::kBinary,
                           const ComparatorFactory &factory = {}, int jobs = 1);

}  // namespace pkrank

#endif  // PKRANK_SELECTION_H_
