// pkrank/sqa.h

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

// Single-utterance quality estimates from the pairwise model.  The network
// always needs two inputs; Replication pairs a clip with itself, NoisySpeech
// pairs it with the unprocessed input it came from and runs both orders.
// Estimates are raw regression outputs, not clamped to [1, 5].

#ifndef PKRANK_SQA_H_
#define PKRANK_SQA_H_

#include <string>
#include <vector>

#include "pkrank/audio.h"
#include "pkrank/metrics.h"
#include "pkrank/model.h"

namespace pkrank {

enum class SqaStrategy { kReplication, kNoisySpeech };

const char *SqaStrategyName(SqaStrategy s);  // "replication" / "noisy"
SqaStrategy ParseSqaStrategy(const std::string &text);

class SqaEstimator {
 public:
  explicit SqaEstimator(ModelParams params, const StftConfig &stft = {});

  /// (MOS_1(s, s) + MOS_2(s, s)) / 2.
  double Replication(const AudioClip &clip) const;

  /// (MOS_1(s, n) + MOS_2(n, s)) / 2.
  double NoisySpeech(const AudioClip &clip, const AudioClip &noisy) const;

 private:
  ModelParams params_;
  LogMelExtractor extractor_;
};

/// Free-function forms.
double MosReplication(const ModelParams &params, const AudioClip &clip);
double MosNoisy(const ModelParams &params, const AudioClip &clip, const AudioClip &noisy);

struct SqaEstimates {
  SqaStrategy strategy = SqaStrategy::kReplication;
  std::vector<std::string> system_ids;
  std::vector<std::string> utterance_ids;
  std::vector<std::vector<double>> estimates;  // [system][utterance]

  std::vector<double> SystemMeans() const;
};

/// Estimates every clip of the set.  NoisySpeech throws DataError when the
/// set has no noisy inputs.
SqaEstimates EstimateSet(const ModelParams &params, const SystemSet &set, SqaStrategy strategy,
                         const StftConfig &stft = {});

/// CSV `system_id,utterance_id,mos_estimate`.
void WriteSqaCsv(const SqaEstimates &est, const std::string &path);

/// System-level correlations of the mean estimates with the mean MOS.
CorrelationReport SqaSystemReport(const SqaEstimates &est, const SystemSet &set);

}  // namespace pkrank

#endif  // PKRANK_SQA_H_
