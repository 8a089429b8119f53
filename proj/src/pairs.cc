// pkrank/pairs.cc

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

#include "pkrank/pairs.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

#include "text_util.h"

namespace pkrank {

PairSet BuildPairs(const SystemSet &set, double delta, Split split) {
  if (!(delta >= 0.0)) throw ConfigError("delta must be >= 0");
  if (!set.mos) throw DataError("cannot build training pairs: system set has no MOS labels");
  const auto &mos = *set.mos;
  const int k = static_cast<int>(set.num_systems());
  const int m = static_cast<int>(set.num_utterances());

  PairSet out;
  out.delta = delta;
  out.split = split;
  for (int i = 0; i < m; ++i) {
    for (int a = 0; a < k; ++a) {
      for (int b = a + 1; b < k; ++b) {
        const double ma = mos[a][i], mb = mos[b][i];
        if (ma == mb || std::abs(ma - mb) <= delta) continue;
        auto make = [&](int x, int y, double mx, double my) {
          LabeledPair p;
          p.utterance_id = set.utterance_ids[i];
          p.system_a = set.system_ids[x];
          p.system_b = set.system_ids[y];
          p.utterance_index = i;
          p.system_a_index = x;
          p.system_b_index = y;
          p.mos_a = mx;
          p.mos_b = my;
          p.target = mx > my ? 1 : 0;
          return p;
        };
        out.pairs.push_back(make(a, b, ma, mb));
        out.pairs.push_back(make(b, a, mb, ma));
      }
    }
  }
  return out;
}

SystemSet SelectUtterances(const SystemSet &set, const std::vector<int> &indices) {
  SystemSet out;
  out.system_ids = set.system_ids;
  const size_t k = set.num_systems();
  out.clips.assign(k, {});
  if (set.mos) out.mos.emplace(k);
  if (set.noisy) out.noisy.emplace();
  if (set.noisy_mos) out.noisy_mos.emplace();
  if (set.clip_paths) out.clip_paths.emplace(k);
  if (set.noisy_paths) out.noisy_paths.emplace();
  for (int i : indices) {
    if (i < 0 || static_cast<size_t>(i) >= set.num_utterances())
      throw ConfigError("utterance index out of range");
    out.utterance_ids.push_back(set.utterance_ids[i]);
    for (size_t s = 0; s < k; ++s) {
      out.clips[s].push_back(set.clips[s][i]);
      if (set.mos) (*out.mos)[s].push_back((*set.mos)[s][i]);
      if (set.clip_paths) (*out.clip_paths)[s].push_back((*set.clip_paths)[s][i]);
    }
    if (set.noisy) out.noisy->push_back((*set.noisy)[i]);
    if (set.noisy_mos) out.noisy_mos->push_back((*set.noisy_mos)[i]);
    if (set.noisy_paths) out.noisy_paths->push_back((*set.noisy_paths)[i]);
  }
  return out;
}

std::pair<SystemSet, SystemSet> SplitValidation(const SystemSet &set, int n_val_utts,
                                                uint64_t seed) {
  const int m = static_cast<int>(set.num_utterances());
  if (n_val_utts < 0 || n_val_utts >= m)
    throw ConfigError("validation split needs 0 <= n_val < M (n_val = " +
                      std::to_string(n_val_utts) + ", M = " + std::to_string(m) + ")");
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(seed, "pairs/split"));
  rng.Shuffle(order);
  std::vector<int> val(order.begin(), order.begin() + n_val_utts);
  std::vector<int> train(order.begin() + n_val_utts, order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {SelectUtterances(set, train), SelectUtterances(set, val)};
}

void WritePairManifest(const PairSet &pairs, const std::string &path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << "utterance_id,system_a,system_b,mos_a,mos_b,target\n";
  for (const auto &p : pairs.pairs)
    os << p.utterance_id << ',' << p.system_a << ',' << p.system_b << ','
       << internal::FormatDouble(p.mos_a) << ',' << internal::FormatDouble(p.mos_b) << ','
       << p.target << '\n';
  if (!os) throw IoError("write failed: " + path);
}

PairSet ReadPairManifest(const std::string &path, const SystemSet &set) {
  std::map<std::string, int> sys, utt;
  for (size_t s = 0; s < set.num_systems(); ++s) sys[set.system_ids[s]] = static_cast<int>(s);
  for (size_t i = 0; i < set.num_utterances(); ++i)
    utt[set.utterance_ids[i]] = static_cast<int>(i);

  PairSet out;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto &row : internal::ReadCsv(
           path, {"utterance_id", "system_a", "system_b", "mos_a", "mos_b", "target"})) {
    LabeledPair p;
    p.utterance_id = row[0];
    p.system_a = row[1];
    p.system_b = row[2];
    auto u = utt.find(p.utterance_id);
    auto a = sys.find(p.system_a);
    auto b = sys.find(p.system_b);
    if (u == utt.end() || a == sys.end() || b == sys.end())
      throw DataError("manifest pair " + p.utterance_id + "/" + p.system_a + "/" +
                      p.system_b + " not present in the system set");
    if (a->second == b->second) throw DataError("manifest pair compares a system with itself");
    if (!seen.emplace(row[0], row[1], row[2]).second)
      throw DataError("duplicate manifest pair " + row[0] + "/" + row[1] + "/" + row[2]);
    p.utterance_index = u->second;
    p.system_a_index = a->second;
    p.system_b_index = b->second;
    p.mos_a = internal::ParseDouble(row[3], "mos_a");
    p.mos_b = internal::ParseDouble(row[4], "mos_b");
    p.target = static_cast<int>(internal::ParseInt(row[5], "target"));
    if (p.target != 0 && p.target != 1) throw FormatError("manifest target must be 0 or 1");
    out.pairs.push_back(std::move(p));
  }
  return out;
}

}  // namespace pkrank
