// pkrank/tests/oracles.h

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

// Slow, obviously-correct reference implementations the tests compare the
// library against.  Nothing here shares code with src/.

#ifndef PKRANK_TESTS_ORACLES_H_
#define PKRANK_TESTS_ORACLES_H_

#include <cmath>
#include <complex>
#include <string>
#include <vector>

namespace oracle {

inline double Mean(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double Pearson(const std::vector<double> &x, const std::vector<double> &y) {
  const double mx = Mean(x), my = Mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Rank of x[i] = 1 + #{j: x[j] < x[i]} + (#{j != i: x[j] == x[i]}) / 2.
inline std::vector<double> Ranks(const std::vector<double> &x) {
  std::vector<double> r(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double less = 0.0, equal = 0.0;
    for (size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) less += 1.0;
      if (j != i && x[j] == x[i]) equal += 1.0;
    }
    r[i] = 1.0 + less + 0.5 * equal;
  }
  return r;
}

inline double Spearman(const std::vector<double> &x, const std::vector<double> &y) {
  return Pearson(Ranks(x), Ranks(y));
}

// Tau-b by enumerating all pairs.
inline double KendallTauB(const std::vector<double> &x, const std::vector<double> &y) {
  double conc = 0.0, disc = 0.0, only_x = 0.0, only_y = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    for (size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        only_x += 1.0;
      } else if (dy == 0.0) {
        only_y += 1.0;
      } else if (dx * dy > 0.0) {
        conc += 1.0;
      } else {
        disc += 1.0;
      }
    }
  }
  // Pairs untied in x are conc + disc + only_y; untied in y conc + disc + only_x.
  return (conc - disc) / std::sqrt((conc + disc + only_y) * (conc + disc + only_x));
}

// Direct O(N^2) DFT power spectrum of one frame, bins 0..n/2.
inline std::vector<double> DftPower(const std::vector<double> &frame) {
  const size_t n = frame.size();
  std::vector<double> out(n / 2 + 1);
  for (size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (size_t t = 0; t < n; ++t)
      acc += frame[t] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * t) / n);
    out[k] = std::norm(acc);
  }
  return out;
}

// Algorithm-1 accumulation written as literally as possible, driven by a
// precomputed score table score[k][w][i] (k < w).
inline std::vector<double> EcsScores(const std::vector<std::vector<std::vector<double>>> &score,
                                     int k_count, int m_count, bool binary) {
  std::vector<double> p(k_count, 0.0);
  for (int k = 0; k < k_count; ++k)
    for (int w = k + 1; w < k_count; ++w)
      for (int i = 0; i < m_count; ++i) {
        const double s = score[k][w][i];
        if (binary) {
          if (s > 0.5)
            p[k] += 1;
          else
            p[w] += 1;
        } else {
          p[k] += s;
          p[w] += 1 - s;
        }
      }
  return p;
}

}  // namespace oracle

#endif  // PKRANK_TESTS_ORACLES_H_
