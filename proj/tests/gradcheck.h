// pkrank/tests/gradcheck.h

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

// Central finite-difference check of the network gradient, in double
// precision and with train-mode batch norm.  Shared by the unit test and the
// acceptance run.

#ifndef PKRANK_TESTS_GRADCHECK_H_
#define PKRANK_TESTS_GRADCHECK_H_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pkrank/model.h"
#include "pkrank/network.h"

namespace testing {

struct GradCheckReport {
  size_t checked = 0;
  size_t failed = 0;
  double worst_rel = 0.0;
  std::string worst_name;
  std::vector<std::string> failures;  // first few, for diagnostics
};

struct GradCheckProblem {
  pkrank::ModelConfig config;
  std::vector<double> params;
  pkrank::NetInput<double> input;
  std::vector<pkrank::LabeledPair> pairs;
  double alpha = 0.5;
  double beta = 0.5;
};

inline double LogisticForCheck(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Mean loss over the batch and, optionally, its gradient.
inline double BatchLoss(pkrank::Network<double> &net, const GradCheckProblem &p,
                        std::vector<double> *grad) {
  using namespace pkrank;
  const auto out = net.Forward(p.params, p.input, BatchNormMode::kTrain, grad != nullptr);
  const double inv_b = 1.0 / static_cast<double>(out.size());
  double total = 0.0;
  std::vector<Network<double>::Output> d(out.size());
  for (size_t b = 0; b < out.size(); ++b) {
    ComparisonResult r;
    r.score_cp = LogisticForCheck(out[b][0]);
    r.mos_pre_1 = out[b][1];
    r.mos_pre_2 = out[b][2];
    const LossValue l = Loss(r, p.pairs[b], p.alpha, p.beta);
    total += l.total * inv_b;
    for (int o = 0; o < 3; ++o) d[b][o] = l.d_outputs[o] * inv_b;
  }
  if (grad) {
    grad->assign(p.params.size(), 0.0);
    net.Backward(p.params, d, *grad);
  }
  return total;
}

// Builds a batch of `batch` random fused inputs with alternating targets.
inline GradCheckProblem MakeGradCheckProblem(const pkrank::ModelConfig &config, int frames,
                                             int batch, uint64_t seed) {
  using namespace pkrank;
  GradCheckProblem p;
  p.config = config;
  const ModelParams mp = InitParams(config, seed);
  p.params.assign(mp.values.begin(), mp.values.end());
  Rng rng(DeriveSeed(seed, "gradcheck/input"));
  p.input.batch = batch;
  p.input.frames = frames;
  p.input.n_mels = config.n_mels;
  p.input.data.resize(static_cast<size_t>(batch) * 2 * frames * config.n_mels);
  for (double &v : p.input.data) v = rng.Gaussian();
  for (int b = 0; b < batch; ++b) {
    LabeledPair lp;
    lp.mos_a = 1.0 + 4.0 * rng.Uniform();
    lp.mos_b = 1.0 + 4.0 * rng.Uniform();
    lp.target = lp.mos_a > lp.mos_b ? 1 : 0;
    p.pairs.push_back(lp);
  }
  return p;
}

// Compares every trainable parameter's analytic gradient with
// (L(w + h) - L(w - h)) / 2h.  Passes when |g - fd| <= max(rel * max(|g|,
// |fd|), abs_floor).
inline GradCheckReport RunGradCheck(GradCheckProblem p, double step = 1e-6, double rel = 1e-4,
                                    double abs_floor = 1e-6) {
  using namespace pkrank;
  Network<double> net(p.config);
  std::vector<double> grad;
  BatchLoss(net, p, &grad);
  const auto layout = BuildParamLayout(p.config);
  GradCheckReport rep;
  for (const auto &e : layout) {
    if (!e.trainable) continue;
    for (size_t j = 0; j < e.size; ++j) {
      const size_t idx = e.offset + j;
      const double saved = p.params[idx];
      p.params[idx] = saved + step;
      const double up = BatchLoss(net, p, nullptr);
      p.params[idx] = saved - step;
      const double down = BatchLoss(net, p, nullptr);
      p.params[idx] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double g = grad[idx];
      const double err = std::abs(g - fd);
      const double scale = std::max(std::abs(g), std::abs(fd));
      ++rep.checked;
      const double r = scale > 0.0 ? err / scale : 0.0;
      if (err > abs_floor && r > rep.worst_rel) {
        rep.worst_rel = r;
        rep.worst_name = e.name + "[" + std::to_string(j) + "]";
      }
      if (err > std::max(rel * scale, abs_floor)) {
        ++rep.failed;
        if (rep.failures.size() < 10)
          rep.failures.push_back(e.name + "[" + std::to_string(j) + "] analytic " +
                                 std::to_string(g) + " numeric " + std::to_string(fd));
      }
    }
  }
  return rep;
}

}  // namespace testing

#endif  // PKRANK_TESTS_GRADCHECK_H_
