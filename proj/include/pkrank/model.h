// pkrank/model.h

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

// The utterance-level pairwise comparator network.
//
// Two log-mel matrices are stacked as channels of a (2, T, N) input and fed
// to a residual CNN: a 3x3 stem, four stages of basic residual blocks (the
// first block of stages 2-4 downsamples by two in both axes), mean and
// variance pooling over time, and an affine map to three outputs.  Output 0
// goes through a logistic and becomes the comparative score; outputs 1 and 2
// are the MOS estimates of the first and second input.

#ifndef PKRANK_MODEL_H_
#define PKRANK_MODEL_H_

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pkrank/features.h"
#include "pkrank/pairs.h"

namespace pkrank {

struct ModelConfig {
  std::array<int, 4> block_counts = {1, 1, 1, 1};
  int base_channels = 8;
  int n_mels = kDefaultNumMels;
  bool desk_profile = true;

  /// [3, 4, 6, 3] blocks, 32 stem filters.
  static ModelConfig Full();
  /// [1, 1, 1, 1] blocks, 8 stem filters; trainable on a CPU in minutes.
  static ModelConfig Desk();

  void Check() const;
  int StageChannels(int stage) const { return base_channels << stage; }
  // Frequency bins left after the three stride-2 stages: ceil(N / 8).
  int ReducedMels() const { return (n_mels + 7) / 8; }
  // Length of the pooled embedding: temporal mean and variance for every
  // (channel, reduced frequency) cell of the last stage.
  int PooledDim() const { return 2 * StageChannels(3) * ReducedMels(); }

  bool operator==(const ModelConfig &other) const = default;
};

struct ParamEntry {
  std::string name;
  std::vector<int> dims;
  size_t offset = 0;
  size_t size = 0;
  // Running batch-norm statistics are buffers, not trainable.
  bool trainable = true;

  bool operator==(const ParamEntry &other) const = default;
};

/// Flat parameter storage plus the named layout the network reads it with.
struct ModelParams {
  ModelConfig config;
  std::vector<ParamEntry> layout;
  std::vector<float> values;

  const ParamEntry &Entry(const std::string &name) const;
  std::span<float> Tensor(const std::string &name);
  std::span<const float> Tensor(const std::string &name) const;
  size_t NumTrainable() const;

  bool operator==(const ModelParams &other) const = default;
};

/// Builds the parameter layout for a configuration (values left empty).
std::vector<ParamEntry> BuildParamLayout(const ModelConfig &config);

struct InitOptions {
  // Zero the final affine map, making every output 0 (score 0.5).
  bool zero_final_affine = false;
  // Bias given to the two MOS outputs; the centre of the label range.
  double mos_bias = 3.0;
};

/// He-normal convolution kernels, unit batch-norm scales, small final map.
ModelParams InitParams(const ModelConfig &config, uint64_t seed, const InitOptions &opts = {});

struct ComparisonResult {
  double score_cp = 0.5;
  double mos_pre_1 = 3.0;
  double mos_pre_2 = 3.0;
};

/// Two log-mel matrices stacked as channels: data[c][t][n], c in {0, 1}.
struct FusedFeature {
  int frames = 0;
  int n_mels = 0;
  std::vector<float> data;

  float at(int c, int t, int n) const {
    return data[(static_cast<size_t>(c) * frames + t) * n_mels + n];
  }
};

/// Channel 0 = x1, channel 1 = x2.  The shorter input is padded along time
/// with pad_value (the silence floor).  Throws ShapeError when N differs.
FusedFeature Fuse(const MelSpec &x1, const MelSpec &x2, float pad_value);

// Minimum number of frames the network accepts (total time stride).
inline constexpr int kMinFrames = 8;

/// Inference-mode forward pass (batch norm uses running statistics).
/// Throws TooShortError when T < 8 and NumericError on non-finite output.
ComparisonResult Forward(const ModelParams &params, const FusedFeature &fused);

/// Batched inference; all inputs are padded to the longest T in the batch.
std::vector<ComparisonResult> ForwardBatch(const ModelParams &params,
                                           std::span<const FusedFeature *const> batch);

struct LossValue {
  double total = 0.0;
  double cp = 0.0;   // BCE on the comparative score
  double sc = 0.0;   // MSE on the two MOS estimates
  // Derivatives of `total` with respect to the raw network outputs: the
  // pre-logistic score and the two MOS estimates.
  std::array<double, 3> d_outputs = {0.0, 0.0, 0.0};
};

inline constexpr double kDefaultAlpha = 0.5;
inline constexpr double kDefaultBeta = 0.5;

/// alpha * BCE(score, mos_a > mos_b) + beta * mean((mos_pre - mos)^2).  The
/// score is clamped to [1e-7, 1 - 1e-7] before the logarithm.
LossValue Loss(const ComparisonResult &result, const LabeledPair &pair, double alpha,
               double beta);

enum class BatchNormMode {
  kTrain,     // batch statistics
  kInference  // running statistics
};

struct BatchGradient {
  double loss = 0.0;                 // mean loss over the batch
  std::vector<double> gradient;      // same layout as ModelParams::values
  std::vector<ComparisonResult> results;
};

/// Exact gradient of the mean batch loss with respect to every trainable
/// parameter (buffers get zero).  Computed in double precision.
BatchGradient Backward(const ModelParams &params, std::span<const FusedFeature> fused,
                       std::span<const LabeledPair> pairs, double alpha, double beta,
                       BatchNormMode mode = BatchNormMode::kTrain);

enum class OptimizerKind { kAdamW, kSgd };

struct TrainConfig {
  int batch_size = 12;
  double learning_rate = 1e-4;
  double weight_decay = 1e-6;
  int epochs = 30;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  int keep_checkpoints = 9;
  OptimizerKind optimizer = OptimizerKind::kAdamW;
  double momentum = 0.9;  // SGD only
  uint64_t seed = 0;
  StftConfig stft;
  InitOptions init;
  ModelConfig model = ModelConfig::Desk();
};

struct Checkpoint {
  int epoch = 0;
  double val_loss = 0.0;
  double train_loss = 0.0;
  ModelParams params;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  // Retained checkpoints ordered by ascending validation loss.
  std::vector<Checkpoint> checkpoints;
  std::vector<EpochLog> log;
  // Mean training-set loss of the initial parameters (batch statistics,
  // no updates), comparable with log[0].train_loss.
  double initial_train_loss = 0.0;
  ModelParams final_params;
};

// Called after every epoch with the log entry and the parameters reached.
using EpochCallback = std::function<void(const EpochLog &, const ModelParams &)>;

/// Mini-batch training with a seeded shuffle.  Features are computed once
/// per clip.  Keeps the keep_checkpoints epochs with the lowest validation
/// loss (training loss when there are no validation pairs).  Throws
/// ConfigError for an empty training pair set.
TrainResult Train(const SystemSet &train_set, const PairSet &train_pairs,
                  const SystemSet &val_set, const PairSet &val_pairs, const TrainConfig &cfg,
                  const EpochCallback &on_epoch = {});

/// Same, starting from the given parameters instead of a fresh init.
TrainResult Train(const SystemSet &train_set, const PairSet &train_pairs,
                  const SystemSet &val_set, const PairSet &val_pairs, const TrainConfig &cfg,
                  ModelParams params, const EpochCallback &on_epoch = {});

/// Log-mel features for every clip of a set, [system][utterance].
using FeatureBank = std::vector<std::vector<MelSpec>>;
FeatureBank ComputeFeatureBank(const SystemSet &set, const StftConfig &stft, int n_mels);

/// Mean loss of a pair set under inference-mode batch norm.
double EvaluatePairLoss(const ModelParams &params, const FeatureBank &features,
                        const PairSet &pairs, double alpha, double beta, float pad_value);

/// Fraction of pairs whose score falls on the side of 0.5 given by target.
double PairAccuracy(const ModelParams &params, const FeatureBank &features,
                    const PairSet &pairs, float pad_value);

/// Versioned little-endian checkpoint: "PKCK", version, ModelConfig, then
/// named tensors (name length + bytes, rank, dims, float32 values).
void SaveCheckpoint(const ModelParams &params, const std::string &path);
ModelParams LoadCheckpoint(const std::string &path);

}  // namespace pkrank

#endif  // PKRANK_MODEL_H_
