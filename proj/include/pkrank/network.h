// pkrank/network.h

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

// Precision-generic forward/backward engine behind model.h.  Training runs in
// float; gradient checks run the same code in double.

#ifndef PKRANK_NETWORK_H_
#define PKRANK_NETWORK_H_

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "pkrank/model.h"

namespace pkrank {

/// A batch of fused inputs, (B, 2, T, N) row-major.
template <typename Real>
struct NetInput {
  int batch = 0;
  int frames = 0;
  int n_mels = 0;
  std::vector<Real> data;
};

/// Packs fused features into one batch, padding time with pad_value.
template <typename Real>
NetInput<Real> PackBatch(std::span<const FusedFeature *const> items, float pad_value);

template <typename Real>
class Network {
 public:
  using Output = std::array<Real, 3>;

  explicit Network(const ModelConfig &config);
  ~Network();
  Network(Network &&) noexcept;
  Network &operator=(Network &&) noexcept;

  const ModelConfig &config() const;

  /// Raw outputs (pre-logistic score, mos 1, mos 2) per batch item.  When
  /// keep_cache is set the activations are retained for Backward.
  std::vector<Output> Forward(std::span<const Real> params, const NetInput<Real> &input,
                              BatchNormMode mode, bool keep_cache);

  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(outputs).
  /// Requires a preceding Forward with keep_cache on the same params.
  void Backward(std::span<const Real> params, std::span<const Output> d_outputs,
                std::span<Real> grad);

  /// Folds the batch statistics of the last train-mode Forward into the
  /// running statistics: running = (1 - momentum) running + momentum batch,
  /// with the unbiased batch variance.
  void UpdateRunningStats(std::span<Real> params, double momentum = 0.1) const;

  /// Stage-4 activation of the last Forward, shape (B, C4, T', N').
  std::array<int, 4> LastStageShape() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

extern template class Network<float>;
extern template class Network<double>;

/// Temporal mean and population variance of a (B, C, T, F) activation.  Per
/// batch item the result holds C * F means (channel-major) followed by the
/// C * F variances.
template <typename Real>
std::vector<Real> MeanVariancePool(std::span<const Real> x, int batch, int channels, int frames,
                                   int freqs);

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

}  // namespace pkrank

#endif  // PKRANK_NETWORK_H_
