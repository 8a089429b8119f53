// pkrank/sqa.cc

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

#include "pkrank/sqa.h"

#include <fstream>

#include "text_util.h"

namespace pkrank {

const char *SqaStrategyName(SqaStrategy s) {
  return s == SqaStrategy::kReplication ? "replication" : "noisy";
}

SqaStrategy ParseSqaStrategy(const std::string &text) {
  if (text == "replication") return SqaStrategy::kReplication;
  if (text == "noisy" || text == "noisy-speech") return SqaStrategy::kNoisySpeech;
  throw ConfigError("unknown SQA strategy '" + text + "' (expected replication or noisy)");
}

SqaEstimator::SqaEstimator(ModelParams params, const StftConfig &stft)
    : params_(std::move(params)), extractor_(stft, params_.config.n_mels, kCanonicalRateHz) {}

double SqaEstimator::Replication(const AudioClip &clip) const {
  const MelSpec x = extractor_.Compute(clip);
  const auto r = Forward(params_, Fuse(x, x, static_cast<float>(extractor_.SilenceFloor())));
  return 0.5 * (r.mos_pre_1 + r.mos_pre_2);
}

double SqaEstimator::NoisySpeech(const AudioClip &clip, const AudioClip &noisy) const {
  if (noisy.empty()) throw DataError("noisy-speech estimate needs the unprocessed input");
  const float pad = static_cast<float>(extractor_.SilenceFloor());
  const MelSpec s = extractor_.Compute(clip);
  const MelSpec n = extractor_.Compute(noisy);
  const auto sn = Forward(params_, Fuse(s, n, pad));
  const auto ns = Forward(params_, Fuse(n, s, pad));
  return 0.5 * (sn.mos_pre_1 + ns.mos_pre_2);
}

double MosReplication(const ModelParams &params, const AudioClip &clip) {
  return SqaEstimator(params).Replication(clip);
}

double MosNoisy(const ModelParams &params, const AudioClip &clip, const AudioClip &noisy) {
  return SqaEstimator(params).NoisySpeech(clip, noisy);
}

std::vector<double> SqaEstimates::SystemMeans() const {
  std::vector<double> out;
  for (const auto &row : estimates) {
    double s = 0.0;
    for (double v : row) s += v;
    out.push_back(row.empty() ? 0.0 : s / static_cast<double>(row.size()));
  }
  return out;
}

SqaEstimates EstimateSet(const ModelParams &params, const SystemSet &set, SqaStrategy strategy,
                         const StftConfig &stft) {
  if (strategy == SqaStrategy::kNoisySpeech && !set.noisy)
    throw DataError("noisy-speech estimates need the set's noisy inputs");
  set.Validate();
  const SqaEstimator est(params, stft);
  SqaEstimates out;
  out.strategy = strategy;
  out.system_ids = set.system_ids;
  out.utterance_ids = set.utterance_ids;
  out.estimates.assign(set.num_systems(), {});
  for (size_t k = 0; k < set.num_systems(); ++k)
    for (size_t i = 0; i < set.num_utterances(); ++i)
      out.estimates[k].push_back(strategy == SqaStrategy::kReplication
                                     ? est.Replication(set.clips[k][i])
                                     : est.NoisySpeech(set.clips[k][i], (*set.noisy)[i]));
  return out;
}

void WriteSqaCsv(const SqaEstimates &est, const std::string &path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << "system_id,utterance_id,mos_estimate\n";
  for (size_t k = 0; k < est.system_ids.size(); ++k)
    for (size_t i = 0; i < est.utterance_ids.size(); ++i)
      os << est.system_ids[k] << ',' << est.utterance_ids[i] << ','
         << internal::FormatDouble(est.estimates[k][i]) << '\n';
  if (!os) throw IoError("write failed: " + path);
}

CorrelationReport SqaSystemReport(const SqaEstimates &est, const SystemSet &set) {
  return CorrelationReportFor(est.system_ids, est.SystemMeans(), set.system_ids, set.MeanMos());
}

}  // namespace pkrank
