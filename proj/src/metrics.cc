// pkrank/metrics.cc

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

#include "pkrank/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace pkrank {

namespace {

void CheckInputs(std::span<const double> x, std::span<const double> y, const char *what) {
  if (x.size() != y.size())
    throw ConfigError(std::string(what) + ": vectors differ in length");
  if (x.size() < 2) throw ConfigError(std::string(what) + ": need at least two points");
  for (size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw DataError(std::string(what) + ": non-finite input");
}

bool IsConstant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double a) { return a == v[0]; });
}

double Pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelationError("correlation of a constant vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Sum over runs of equal adjacent values of run*(run-1)/2.
template <typename Eq>
double TiedPairs(size_t n, Eq equal) {
  double total = 0.0;
  size_t run = 1;
  for (size_t i = 1; i <= n; ++i) {
    if (i < n && equal(i - 1, i)) {
      ++run;
    } else {
      total += 0.5 * static_cast<double>(run) * static_cast<double>(run - 1);
      run = 1;
    }
  }
  return total;
}

// Sorts v ascending, returning the number of strict inversions removed.
double MergeCountSwaps(std::vector<double> &v, std::vector<double> &tmp, size_t lo, size_t hi) {
  if (hi - lo < 2) return 0.0;
  const size_t mid = lo + (hi - lo) / 2;
  double swaps = MergeCountSwaps(v, tmp, lo, mid) + MergeCountSwaps(v, tmp, mid, hi);
  size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<double>(mid - i);
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + lo, tmp.begin() + hi, v.begin() + lo);
  return swaps;
}

}  // namespace

double Lcc(std::span<const double> x, std::span<const double> y) {
  CheckInputs(x, y, "LCC");
  if (IsConstant(x) || IsConstant(y)) throw UndefinedCorrelationError("LCC of a constant vector");
  return Pearson(x, y);
}

std::vector<double> MidRanks(std::span<const double> x) {
  const size_t n = x.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double Srcc(std::span<const double> x, std::span<const double> y) {
  CheckInputs(x, y, "SRCC");
  if (IsConstant(x) || IsConstant(y)) throw UndefinedCorrelationError("SRCC of a constant vector");
  const auto rx = MidRanks(x);
  const auto ry = MidRanks(y);
  return Pearson(rx, ry);
}

double Krcc(std::span<const double> x, std::span<const double> y) {
  CheckInputs(x, y, "KRCC");
  if (IsConstant(x) || IsConstant(y)) throw UndefinedCorrelationError("KRCC of a constant vector");
  const size_t n = x.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double ties_x = TiedPairs(n, [&](size_t a, size_t b) { return x[idx[a]] == x[idx[b]]; });
  const double ties_xy = TiedPairs(n, [&](size_t a, size_t b) {
    return x[idx[a]] == x[idx[b]] && y[idx[a]] == y[idx[b]];
  });

  // With pairs ordered by x (ties by y), every remaining inversion in y is a
  // discordant pair.
  std::vector<double> ys(n), tmp(n);
  for (size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const double discordant = MergeCountSwaps(ys, tmp, 0, n);
  const double ties_y = TiedPairs(n, [&](size_t a, size_t b) { return ys[a] == ys[b]; });

  // concordant - discordant = n0 - tx - ty + txy - 2 * discordant
  const double numer = n0 - ties_x - ties_y + ties_xy - 2.0 * discordant;
  const double denom = std::sqrt((n0 - ties_x) * (n0 - ties_y));
  return std::clamp(numer / denom, -1.0, 1.0);
}

CorrelationReport CorrelationReportFor(const std::vector<std::string> &score_ids,
                                       const std::vector<double> &scores,
                                       const std::vector<std::string> &mos_ids,
                                       const std::vector<double> &mean_mos) {
  if (score_ids.size() != scores.size() || mos_ids.size() != mean_mos.size())
    throw DataError("id and value lists differ in length");
  if (score_ids.size() != mos_ids.size())
    throw DataError("score and MOS vectors cover different numbers of systems");
  std::map<std::string, double> mos_by_id;
  for (size_t j = 0; j < mos_ids.size(); ++j)
    if (!mos_by_id.emplace(mos_ids[j], mean_mos[j]).second)
      throw DataError("duplicate system id " + mos_ids[j]);
  std::vector<double> aligned;
  for (const auto &id : score_ids) {
    auto it = mos_by_id.find(id);
    if (it == mos_by_id.end()) throw DataError("no reference MOS for system " + id);
    aligned.push_back(it->second);
  }
  CorrelationReport r;
  r.n = scores.size();
  r.lcc = Lcc(scores, aligned);
  r.srcc = Srcc(scores, aligned);
  r.krcc = Krcc(scores, aligned);
  return r;
}

}  // namespace pkrank
