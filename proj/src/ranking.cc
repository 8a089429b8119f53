// pkrank/ranking.cc

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

#include "pkrank/ranking.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "text_util.h"

namespace pkrank {

const char *StrategyName(Strategy s) { return s == Strategy::kBinary ? "bs" : "nbs"; }

Strategy ParseStrategy(const std::string &text) {
  if (text == "bs" || text == "binary") return Strategy::kBinary;
  if (text == "nbs" || text == "non-binary") return Strategy::kNonBinary;
  throw ConfigError("unknown strategy '" + text + "' (expected bs or nbs)");
}

long long ExpectedComparisons(long long k, long long m) { return k * (k - 1) / 2 * m; }

std::vector<int> RankingResult::Ranks() const {
  std::vector<int> ranks(system_ids.size(), 0);
  for (size_t pos = 0; pos < order.size(); ++pos)
    for (size_t s = 0; s < system_ids.size(); ++s)
      if (system_ids[s] == order[pos]) ranks[s] = static_cast<int>(pos) + 1;
  return ranks;
}

namespace {

ClipRef MakeRef(const SystemSet &set, size_t k, size_t i) {
  ClipRef r;
  r.clip = &set.clips[k][i];
  if (set.mos) r.mos = (*set.mos)[k][i];
  if (set.clip_paths) r.path = (*set.clip_paths)[k][i];
  r.system_id = set.system_ids[k];
  r.utterance_id = set.utterance_ids[i];
  return r;
}

}  // namespace

RankingResult EcsRank(const SystemSet &set, Comparator &cmp, Strategy strategy, int jobs) {
  const size_t k_count = set.num_systems();
  const size_t m_count = set.num_utterances();
  if (k_count < 2) throw ConfigError("ranking needs at least two systems");
  if (m_count < 1) throw ConfigError("ranking needs at least one utterance");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (set.clips.size() != k_count) throw DataError("clip table does not match system list");
  for (size_t k = 0; k < k_count; ++k) {
    if (set.clips[k].size() != m_count)
      throw DataError("system " + set.system_ids[k] + " has " +
                      std::to_string(set.clips[k].size()) + " clips, expected " +
                      std::to_string(m_count));
    for (size_t i = 0; i < m_count; ++i)
      if (set.clips[k][i].empty() && !(set.clip_paths && !(*set.clip_paths)[k][i].empty()))
        throw DataError("missing clip for system " + set.system_ids[k] + ", utterance " +
                        set.utterance_ids[i]);
  }

  // Cell c covers pair p = c / M and utterance i = c % M.
  std::vector<std::pair<size_t, size_t>> system_pairs;
  for (size_t k = 0; k < k_count; ++k)
    for (size_t w = k + 1; w < k_count; ++w) system_pairs.emplace_back(k, w);
  const size_t n_cells = system_pairs.size() * m_count;
  std::vector<double> cell_score(n_cells, 0.0);
  std::vector<std::exception_ptr> cell_error(n_cells);

  auto run_cell = [&](size_t c) {
    const auto [k, w] = system_pairs[c / m_count];
    const size_t i = c % m_count;
    try {
      const double s = cmp.Compare(MakeRef(set, k, i), MakeRef(set, w, i)).score_cp;
      if (!(s >= 0.0 && s <= 1.0))
        throw NumericError("comparator '" + cmp.name() + "' returned score " +
                           std::to_string(s) + " for " + set.system_ids[k] + " vs " +
                           set.system_ids[w] + " on " + set.utterance_ids[i]);
      cell_score[c] = s;
    } catch (...) {
      cell_error[c] = std::current_exception();
    }
  };

  const size_t n_threads = cmp.reentrant() ? std::min<size_t>(jobs, n_cells) : 1;
  if (n_threads <= 1) {
    for (size_t c = 0; c < n_cells; ++c) {
      run_cell(c);
      if (cell_error[c]) break;
    }
  } else {
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (size_t t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (size_t c; !failed && (c = next.fetch_add(1)) < n_cells;) {
          run_cell(c);
          if (cell_error[c]) failed = true;
        }
      });
    for (auto &th : pool) th.join();
  }
  for (const auto &e : cell_error)
    if (e) std::rethrow_exception(e);

  RankingResult out;
  out.system_ids = set.system_ids;
  out.scores.assign(k_count, 0.0);
  out.strategy = strategy;
  out.comparator = cmp.name();
  for (size_t c = 0; c < n_cells; ++c) {
    const auto [k, w] = system_pairs[c / m_count];
    const double s = cell_score[c];
    if (strategy == Strategy::kBinary) {
      if (s > 0.5)
        out.scores[k] += 1.0;
      else
        out.scores[w] += 1.0;
    } else {
      out.scores[k] += s;
      out.scores[w] += 1.0 - s;
    }
    ++out.comparisons;
  }

  std::vector<size_t> idx(k_count);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (out.scores[a] != out.scores[b]) return out.scores[a] > out.scores[b];
    return out.system_ids[a] < out.system_ids[b];
  });
  for (size_t s : idx) out.order.push_back(out.system_ids[s]);
  return out;
}

SystemSet IncludeNoisySystem(const SystemSet &set) {
  if (std::find(set.system_ids.begin(), set.system_ids.end(), kNoisySystemId) !=
      set.system_ids.end())
    throw DataError("the noisy system is already included");
  if (!set.noisy) throw DataError("the system set has no noisy inputs to include");
  if (set.noisy->size() != set.num_utterances())
    throw DataError("noisy inputs do not cover every utterance");

  SystemSet out = set;
  out.system_ids.push_back(kNoisySystemId);
  out.clips.push_back(*set.noisy);
  if (out.mos) {
    if (set.noisy_mos)
      out.mos->push_back(*set.noisy_mos);
    else
      out.mos.reset();
  }
  if (out.clip_paths) {
    if (set.noisy_paths)
      out.clip_paths->push_back(*set.noisy_paths);
    else
      out.clip_paths.reset();
  }
  return out;
}

std::string RankingCsv(const RankingResult &result) {
  std::ostringstream os;
  os << "system_id,score,rank\n";
  for (size_t pos = 0; pos < result.order.size(); ++pos) {
    const auto it =
        std::find(result.system_ids.begin(), result.system_ids.end(), result.order[pos]);
    const size_t s = static_cast<size_t>(it - result.system_ids.begin());
    os << result.order[pos] << ',' << internal::FormatDouble(result.scores[s]) << ','
       << pos + 1 << '\n';
  }
  return os.str();
}

void WriteRankingCsv(const RankingResult &result, const std::string &path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << RankingCsv(result);
  if (!os) throw IoError("write failed: " + path);
}

std::string RankingSummaryJson(const RankingResult &result,
                               const std::optional<CorrelationReport> &report) {
  nlohmann::ordered_json j;
  j["strategy"] = StrategyName(result.strategy);
  j["comparator"] = result.comparator;
  j["num_systems"] = result.system_ids.size();
  j["comparisons"] = result.comparisons;
  j["order"] = result.order;
  nlohmann::ordered_json scores;
  for (size_t s = 0; s < result.system_ids.size(); ++s)
    scores[result.system_ids[s]] = result.scores[s];
  j["scores"] = scores;
  if (report) {
    j["correlation"] = {{"lcc", report->lcc},
                        {"srcc", report->srcc},
                        {"krcc", report->krcc},
                        {"sum", report->Sum()},
                        {"n", report->n}};
  }
  return j.dump(2) + "\n";
}

CorrelationReport ReportAgainstMos(const RankingResult &result, const SystemSet &set) {
  return CorrelationReportFor(result.system_ids, result.scores, set.system_ids, set.MeanMos());
}

}  // namespace pkrank
