// pkrank/tools/pkrank.cc

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

// Command-line front end: synthesize corpora, build pair manifests, train
// the pairwise comparator, rank systems and run the delta sweep.
//
// Exit status: 0 on success, 2 for configuration or data errors, 3 when
// training or inference produced non-finite numbers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pkrank/audio.h"
#include "pkrank/comparators.h"
#include "pkrank/metrics.h"
#include "pkrank/model.h"
#include "pkrank/pairs.h"
#include "pkrank/ranking.h"
#include "pkrank/selection.h"
#include "pkrank/sqa.h"
#include "text_util.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace pkrank {
namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

template <typename... Args>
void Log(const char *fmt, Args... args) {
  std::fprintf(stderr, "pkrank: ");
  if constexpr (sizeof...(Args) == 0)
    std::fputs(fmt, stderr);
  else
    std::fprintf(stderr, fmt, args...);
  std::fputc('\n', stderr);
}

std::string Fmt(double v) { return std::isfinite(v) ? internal::FormatDouble(v) : "nan"; }

void WriteText(const std::string &path, const std::string &text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  if (!os) throw IoError("write failed: " + path);
}

void MakeDirs(const std::string &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Configuration: a JSON object whose keys are long flag names ("epochs",
// "weight-decay" or "weight_decay").  Values given on the command line win.

std::string JsonScalar(const json &v, const std::string &key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
    return buf;
  }
  throw ConfigError("config key '" + key + "' must be a string, number or boolean");
}

void ApplyConfigFile(CLI::App &cmd, const std::string &path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception &e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": expected a JSON object");
  for (const auto &[raw_key, value] : j.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    CLI::Option *opt = key == "config" ? nullptr : cmd.get_option_no_throw("--" + key);
    if (opt == nullptr)
      throw ConfigError(path + ": '" + raw_key + "' is not an option of " + cmd.get_name());
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto &item : value) opt->add_result(JsonScalar(item, raw_key));
    } else {
      opt->add_result(JsonScalar(value, raw_key));
    }
    opt->run_callback();
  }
}

// Seed precedence: flag, config file, PKRANK_SEED, 0.
struct SeedFlag {
  uint64_t value = 0;
  CLI::Option *opt = nullptr;

  void Add(CLI::App *cmd) {
    opt = cmd->add_option("--seed", value, "Random seed (falls back to $PKRANK_SEED, then 0)");
  }
  void Resolve() {
    if (opt->count() > 0) return;
    const char *env = std::getenv("PKRANK_SEED");
    if (env == nullptr || *env == '\0') return;
    try {
      value = static_cast<uint64_t>(internal::ParseInt(env, "PKRANK_SEED"));
    } catch (const FormatError &e) {
      throw ConfigError(e.what());
    }
  }
};

// ---------------------------------------------------------------------------
// Training shared by `train` and `sweep-delta`.

struct TrainFlags {
  double delta = kDefaultDelta;
  int epochs = 30;
  int batch = 12;
  double lr = 1e-4;
  double weight_decay = 1e-6;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  std::string profile = "desk";
  std::string optimizer = "adamw";
  int val_utts = 8;
  int keep = 9;
  std::string strategy = "bs";
  int jobs = 1;

  void Add(CLI::App *cmd) {
    cmd->add_option("--epochs", epochs, "Training epochs")->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--batch", batch, "Mini-batch size")->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--lr", lr, "Learning rate")->capture_default_str();
    cmd->add_option("--weight-decay", weight_decay, "Weight decay")->capture_default_str();
    cmd->add_option("--alpha", alpha, "Weight of the comparison loss")->capture_default_str();
    cmd->add_option("--beta", beta, "Weight of the MOS loss")->capture_default_str();
    cmd->add_option("--profile", profile, "Network size")->capture_default_str()
        ->check(CLI::IsMember({"desk", "full"}));
    cmd->add_option("--optimizer", optimizer, "Optimizer")->capture_default_str()
        ->check(CLI::IsMember({"adamw", "sgd"}));
    cmd->add_option("--val-utts", val_utts, "Utterances held out for validation")
        ->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--keep", keep, "Checkpoints retained (lowest validation loss)")
        ->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--strategy", strategy, "Scoring used for checkpoint selection")
        ->capture_default_str()->check(CLI::IsMember({"bs", "nbs"}));
    cmd->add_option("--jobs", jobs, "Threads for validation ranking")->capture_default_str()
        ->check(CLI::PositiveNumber);
  }

  TrainConfig ToConfig(uint64_t seed) const {
    TrainConfig cfg;
    cfg.batch_size = batch;
    cfg.learning_rate = lr;
    cfg.weight_decay = weight_decay;
    cfg.epochs = epochs;
    cfg.alpha = alpha;
    cfg.beta = beta;
    cfg.keep_checkpoints = keep;
    cfg.optimizer = optimizer == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdamW;
    cfg.seed = seed;
    cfg.model = profile == "full" ? ModelConfig::Full() : ModelConfig::Desk();
    return cfg;
  }
};

std::optional<CorrelationReport> RankAndCorrelate(const ModelParams &params,
                                                  const SystemSet &set, Strategy strategy,
                                                  int jobs) {
  ModelComparator cmp(params);
  const RankingResult r = EcsRank(set, cmp, strategy, jobs);
  try {
    return ReportAgainstMos(r, set);
  } catch (const UndefinedCorrelationError &) {
    return std::nullopt;
  }
}

struct EpochRow {
  EpochLog log;
  std::optional<CorrelationReport> val;
};

struct TrainOutcome {
  TrainResult result;
  Selection selection;
  std::vector<EpochRow> rows;
  size_t train_pairs = 0;
  size_t val_pairs = 0;
};

TrainOutcome TrainAndSelect(const SystemSet &train, const PairSet &train_pairs,
                            const SystemSet &val, const TrainFlags &flags, uint64_t seed) {
  if (train_pairs.empty())
    throw ConfigError("no training pairs survive delta = " + Fmt(train_pairs.delta));
  const PairSet val_pairs = BuildPairs(val, flags.delta, Split::kValidation);
  const Strategy strategy = ParseStrategy(flags.strategy);
  TrainOutcome out;
  out.train_pairs = train_pairs.size();
  out.val_pairs = val_pairs.size();
  const auto t0 = std::chrono::steady_clock::now();
  auto on_epoch = [&](const EpochLog &log, const ModelParams &params) {
    EpochRow row{log, RankAndCorrelate(params, val, strategy, flags.jobs)};
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Log("epoch %d/%d train_loss %.4f val_loss %.4f val_sum %s (%.1fs)", log.epoch, flags.epochs,
        log.train_loss, log.val_loss, row.val ? Fmt(row.val->Sum()).c_str() : "undefined",
        secs);
    out.rows.push_back(std::move(row));
  };
  out.result = Train(train, train_pairs, val, val_pairs, flags.ToConfig(seed), on_epoch);
  out.selection =
      SelectCheckpoint(out.result.checkpoints, val, strategy, {}, flags.jobs);
  return out;
}

std::string CheckpointName(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%03d.ckpt", epoch);
  return buf;
}

std::string TrainLogCsv(const std::vector<EpochRow> &rows) {
  std::string s = "epoch,train_loss,val_loss,val_lcc,val_srcc,val_krcc,val_sum\n";
  for (const auto &r : rows) {
    s += std::to_string(r.log.epoch) + ',' + Fmt(r.log.train_loss) + ',' + Fmt(r.log.val_loss);
    if (r.val)
      s += ',' + Fmt(r.val->lcc) + ',' + Fmt(r.val->srcc) + ',' + Fmt(r.val->krcc) + ',' +
           Fmt(r.val->Sum());
    else
      s += ",nan,nan,nan,nan";
    s += '\n';
  }
  return s;
}

SystemSet LoadLabelled(const std::string &dir) {
  SystemSet set = LoadSystemSet(dir);
  if (!set.has_mos()) throw DataError(dir + " has no mos.csv; training needs labels");
  return set;
}

// ---------------------------------------------------------------------------
// Commands.

struct SynthArgs {
  int k = 0, m = 0;
  SeedFlag seed;
  std::string grades;
  double duration = 0.5;
  double mos_noise = 0.0;
  std::string out;
};

int RunSynth(SynthArgs &a) {
  a.seed.Resolve();
  const auto grades = a.grades.empty() ? DefaultGrades(a.k) : ParseGrades(a.grades);
  SynthOptions opts;
  opts.duration_s = a.duration;
  opts.mos_noise_std = a.mos_noise;
  SystemSet set = SynthSystemSet(a.k, a.m, a.seed.value, grades, opts);
  SaveSystemSet(set, a.out);
  std::printf("wrote %d systems x %d utterances to %s\n", a.k, a.m, a.out.c_str());
  return 0;
}

struct PairsArgs {
  std::string data, out, val_out;
  double delta = kDefaultDelta;
  int val_utts = 0;
  SeedFlag seed;
};

int RunPairs(PairsArgs &a) {
  a.seed.Resolve();
  const SystemSet set = LoadLabelled(a.data);
  if (a.val_utts == 0) {
    const PairSet p = BuildPairs(set, a.delta);
    WritePairManifest(p, a.out);
    std::printf("%zu pairs at delta %s\n", p.size(), Fmt(a.delta).c_str());
    return 0;
  }
  const auto [train, val] = SplitValidation(set, a.val_utts, a.seed.value);
  const PairSet tp = BuildPairs(train, a.delta);
  WritePairManifest(tp, a.out);
  std::printf("%zu training pairs", tp.size());
  if (!a.val_out.empty()) {
    const PairSet vp = BuildPairs(val, a.delta, Split::kValidation);
    WritePairManifest(vp, a.val_out);
    std::printf(", %zu validation pairs", vp.size());
  }
  std::printf(" at delta %s\n", Fmt(a.delta).c_str());
  return 0;
}

struct TrainArgs {
  std::string data, out, pairs;
  SeedFlag seed;
  TrainFlags flags;
};

int RunTrain(TrainArgs &a) {
  a.seed.Resolve();
  const SystemSet set = LoadLabelled(a.data);
  const auto [train, val] = SplitValidation(set, a.flags.val_utts, a.seed.value);
  const PairSet train_pairs =
      a.pairs.empty() ? BuildPairs(train, a.flags.delta) : ReadPairManifest(a.pairs, train);
  Log("%zu training pairs over %zu utterances, %zu validation utterances", train_pairs.size(),
      train.num_utterances(), val.num_utterances());
  const TrainOutcome t = TrainAndSelect(train, train_pairs, val, a.flags, a.seed.value);

  const std::string ckpt_dir = a.out + "/checkpoints";
  MakeDirs(ckpt_dir);
  for (const auto &entry : fs::directory_iterator(ckpt_dir))
    if (entry.path().extension() == ".ckpt") fs::remove(entry.path());
  json cks = json::array();
  for (size_t i = 0; i < t.result.checkpoints.size(); ++i) {
    const Checkpoint &c = t.result.checkpoints[i];
    SaveCheckpoint(c.params, ckpt_dir + "/" + CheckpointName(c.epoch));
    const auto &score = t.selection.scores[i];
    cks.push_back({{"epoch", c.epoch},
                   {"file", "checkpoints/" + CheckpointName(c.epoch)},
                   {"val_loss", c.val_loss},
                   {"val_sum", score.report ? json(score.Sum()) : json(nullptr)}});
  }
  const Checkpoint &best = t.result.checkpoints[t.selection.index];
  SaveCheckpoint(best.params, a.out + "/best.ckpt");
  WriteText(a.out + "/train_log.csv", TrainLogCsv(t.rows));

  json summary = {{"seed", a.seed.value},
                  {"delta", a.flags.delta},
                  {"profile", a.flags.profile},
                  {"epochs", a.flags.epochs},
                  {"train_pairs", t.train_pairs},
                  {"val_pairs", t.val_pairs},
                  {"selection_strategy", a.flags.strategy},
                  {"selected_epoch", best.epoch},
                  {"checkpoints", cks}};
  WriteText(a.out + "/train_summary.json", summary.dump(2) + "\n");
  std::printf("selected epoch %d; wrote %s/best.ckpt\n", best.epoch, a.out.c_str());
  return 0;
}

struct RankArgs {
  std::string data, comparator, out;
  std::string strategy = "bs";
  bool include_noisy = false;
  bool symmetrize = false;
  int jobs = 1;
  int timeout_ms = static_cast<int>(ExternComparator::kDefaultTimeout.count());
};

int RunRank(RankArgs &a) {
  SystemSet set = LoadSystemSet(a.data);
  if (a.include_noisy) set = IncludeNoisySystem(set);
  std::unique_ptr<Comparator> cmp;
  if (a.comparator.rfind("extern:", 0) == 0)
    cmp = std::make_unique<ExternComparator>(a.comparator.substr(7),
                                             std::chrono::milliseconds(a.timeout_ms));
  else
    cmp = MakeComparator(a.comparator);
  if (a.symmetrize) cmp = std::make_unique<SymmetrizedComparator>(std::move(cmp));
  const RankingResult r = EcsRank(set, *cmp, ParseStrategy(a.strategy), a.jobs);
  std::optional<CorrelationReport> report;
  if (set.has_mos()) {
    try {
      report = ReportAgainstMos(r, set);
    } catch (const UndefinedCorrelationError &e) {
      Log("correlation omitted: %s", e.what());
    }
  }
  MakeDirs(a.out);
  WriteRankingCsv(r, a.out + "/ranking.csv");
  WriteText(a.out + "/ranking.json", RankingSummaryJson(r, report));
  std::fputs(RankingCsv(r).c_str(), stdout);
  if (report)
    std::printf("lcc %.4f srcc %.4f krcc %.4f\n", report->lcc, report->srcc, report->krcc);
  return 0;
}

struct SqaArgs {
  std::string data, checkpoint, out;
  std::string strategy = "replication";
};

int RunEvalSqa(SqaArgs &a) {
  const SystemSet set = LoadSystemSet(a.data);
  if (!fs::exists(a.checkpoint)) throw ConfigError("checkpoint not found: " + a.checkpoint);
  const ModelParams params = LoadCheckpoint(a.checkpoint);
  const SqaEstimates est = EstimateSet(params, set, ParseSqaStrategy(a.strategy));
  MakeDirs(a.out);
  WriteSqaCsv(est, a.out + "/sqa.csv");
  json means = json::object();
  const auto m = est.SystemMeans();
  for (size_t k = 0; k < m.size(); ++k) means[est.system_ids[k]] = m[k];
  json summary = {{"strategy", SqaStrategyName(est.strategy)},
                  {"checkpoint", fs::path(a.checkpoint).filename().string()},
                  {"system_means", means}};
  if (set.has_mos()) {
    try {
      const CorrelationReport r = SqaSystemReport(est, set);
      summary["correlation"] = {
          {"lcc", r.lcc}, {"srcc", r.srcc}, {"krcc", r.krcc}, {"sum", r.Sum()}, {"n", r.n}};
      std::printf("lcc %.4f srcc %.4f krcc %.4f\n", r.lcc, r.srcc, r.krcc);
    } catch (const UndefinedCorrelationError &e) {
      Log("correlation omitted: %s", e.what());
    }
  }
  WriteText(a.out + "/sqa.json", summary.dump(2) + "\n");
  return 0;
}

struct SweepArgs {
  std::string data, eval_data, out;
  std::vector<double> deltas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7};
  SeedFlag seed;
  TrainFlags flags;
};

int RunSweep(SweepArgs &a) {
  a.seed.Resolve();
  const SystemSet set = LoadLabelled(a.data);
  const auto [train, val] = SplitValidation(set, a.flags.val_utts, a.seed.value);
  const std::optional<SystemSet> eval =
      a.eval_data.empty() ? std::nullopt : std::optional<SystemSet>(LoadLabelled(a.eval_data));
  const SystemSet &eval_set = eval ? *eval : val;
  MakeDirs(a.out);
  std::string table = "delta,train_pairs,lcc,srcc,krcc,sum\n";
  for (double delta : a.deltas) {
    TrainFlags f = a.flags;
    f.delta = delta;
    const PairSet pairs = BuildPairs(train, delta);
    Log("delta %s: %zu training pairs", Fmt(delta).c_str(), pairs.size());
    std::optional<CorrelationReport> rep;
    if (!pairs.empty()) {
      const TrainOutcome t = TrainAndSelect(train, pairs, val, f, a.seed.value);
      const ModelParams &best = t.result.checkpoints[t.selection.index].params;
      SaveCheckpoint(best, a.out + "/delta_" + Fmt(delta) + ".ckpt");
      rep = RankAndCorrelate(best, eval_set, ParseStrategy(f.strategy), f.jobs);
    }
    table += Fmt(delta) + ',' + std::to_string(pairs.size());
    if (rep)
      table += ',' + Fmt(rep->lcc) + ',' + Fmt(rep->srcc) + ',' + Fmt(rep->krcc) + ',' +
               Fmt(rep->Sum());
    else
      table += ",nan,nan,nan,nan";
    table += '\n';
  }
  WriteText(a.out + "/sweep.csv", table);
  std::fputs(table.c_str(), stdout);
  return 0;
}

int Main(int argc, char **argv) {
  CLI::App app{"Pairwise ranking of speech-enhancement systems"};
  app.require_subcommand(1);
  std::map<CLI::App *, std::string> config_paths;
  auto add_config = [&](CLI::App *cmd) {
    cmd->add_option("--config", config_paths[cmd], "JSON file of option values");
  };

  SynthArgs synth;
  auto *c_synth = app.add_subcommand("synth", "Write a synthetic labelled system set");
  c_synth->add_option("--k", synth.k, "Number of systems")->required()
      ->check(CLI::PositiveNumber);
  c_synth->add_option("--m", synth.m, "Number of utterances")->required()
      ->check(CLI::PositiveNumber);
  synth.seed.Add(c_synth);
  c_synth->add_option("--grades", synth.grades,
                      "Degradation grades, e.g. 30,24:0.5,18 (snr[:lowpass]); default spans "
                      "30 to 0 dB");
  c_synth->add_option("--duration", synth.duration, "Clip length in seconds")
      ->capture_default_str();
  c_synth->add_option("--mos-noise", synth.mos_noise, "Std-dev of rater noise on labels")
      ->capture_default_str();
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  add_config(c_synth);

  PairsArgs pairs;
  auto *c_pairs = app.add_subcommand("pairs", "Write a cleaned pair manifest");
  c_pairs->add_option("--data", pairs.data, "System set directory")->required();
  c_pairs->add_option("--delta", pairs.delta, "MOS difference threshold")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  c_pairs->add_option("--val-utts", pairs.val_utts,
                      "Hold out this many utterances before pairing")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  pairs.seed.Add(c_pairs);
  c_pairs->add_option("--out", pairs.out, "Manifest path")->required();
  c_pairs->add_option("--val-out", pairs.val_out, "Validation manifest path");
  add_config(c_pairs);

  TrainArgs train;
  auto *c_train = app.add_subcommand("train", "Train the comparator and select a checkpoint");
  c_train->add_option("--data", train.data, "Labelled system set directory")->required();
  c_train->add_option("--out", train.out, "Output directory")->required();
  c_train->add_option("--pairs", train.pairs, "Training pair manifest (default: built)");
  c_train->add_option("--delta", train.flags.delta, "MOS difference threshold")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  train.seed.Add(c_train);
  train.flags.Add(c_train);
  add_config(c_train);

  RankArgs rank;
  auto *c_rank = app.add_subcommand("rank", "Rank the systems of a set");
  c_rank->add_option("--data", rank.data, "System set directory")->required();
  c_rank->add_option("--comparator", rank.comparator,
                     "oracle | model:<checkpoint> | extern:<command>")->required();
  c_rank->add_option("--strategy", rank.strategy, "bs or nbs")->capture_default_str()
      ->check(CLI::IsMember({"bs", "nbs"}));
  c_rank->add_flag("--include-noisy", rank.include_noisy, "Rank the unprocessed inputs too");
  c_rank->add_flag("--symmetrize", rank.symmetrize, "Average both presentation orders");
  c_rank->add_option("--jobs", rank.jobs, "Comparison threads")->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_rank->add_option("--timeout-ms", rank.timeout_ms, "Per-request timeout for extern:")
      ->capture_default_str()->check(CLI::PositiveNumber);
  c_rank->add_option("--out", rank.out, "Report directory")->required();
  add_config(c_rank);

  SqaArgs sqa;
  auto *c_sqa = app.add_subcommand("eval-sqa", "Absolute MOS estimates from a checkpoint");
  c_sqa->add_option("--data", sqa.data, "System set directory")->required();
  c_sqa->add_option("--checkpoint", sqa.checkpoint, "Model checkpoint")->required();
  c_sqa->add_option("--strategy", sqa.strategy, "replication or noisy")->capture_default_str()
      ->check(CLI::IsMember({"replication", "noisy"}));
  c_sqa->add_option("--out", sqa.out, "Report directory")->required();
  add_config(c_sqa);

  SweepArgs sweep;
  auto *c_sweep = app.add_subcommand("sweep-delta", "Train once per delta and tabulate");
  c_sweep->add_option("--data", sweep.data, "Labelled system set directory")->required();
  c_sweep->add_option("--eval-data", sweep.eval_data,
                      "Labelled set to correlate on (default: the validation split)");
  c_sweep->add_option("--deltas", sweep.deltas, "Comma-separated thresholds")
      ->delimiter(',')->capture_default_str()->check(CLI::NonNegativeNumber);
  c_sweep->add_option("--out", sweep.out, "Output directory")->required();
  sweep.seed.Add(c_sweep);
  sweep.flags.Add(c_sweep);
  add_config(c_sweep);

  try {
    app.parse(argc, argv);
    for (auto &[cmd, path] : config_paths)
      if (cmd->parsed() && !path.empty()) ApplyConfigFile(*cmd, path);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  if (c_synth->parsed()) return RunSynth(synth);
  if (c_pairs->parsed()) return RunPairs(pairs);
  if (c_train->parsed()) return RunTrain(train);
  if (c_rank->parsed()) return RunRank(rank);
  if (c_sqa->parsed()) return RunEvalSqa(sqa);
  return RunSweep(sweep);
}

}  // namespace
}  // namespace pkrank

int main(int argc, char **argv) {
  try {
    return pkrank::Main(argc, argv);
  } catch (const pkrank::NumericError &e) {
    std::fprintf(stderr, "pkrank: numeric failure: %s\n", e.what());
    return pkrank::kExitNumeric;
  } catch (const pkrank::Error &e) {
    std::fprintf(stderr, "pkrank: %s\n", e.what());
    return pkrank::kExitConfig;
  } catch (const CLI::Error &e) {
    std::fprintf(stderr, "pkrank: %s\n", e.what());
    return pkrank::kExitConfig;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "pkrank: unexpected error: %s\n", e.what());
    return 1;
  }
}
