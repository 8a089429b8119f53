// pkrank/model.cc

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

#include "pkrank/model.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "pkrank/network.h"

namespace pkrank {

ModelConfig ModelConfig::Full() {
  ModelConfig c;
  c.block_counts = {3, 4, 6, 3};
  c.base_channels = 32;
  c.desk_profile = false;
  return c;
}

ModelConfig ModelConfig::Desk() { return ModelConfig{}; }

void ModelConfig::Check() const {
  for (int n : block_counts)
    if (n < 1) throw ConfigError("every stage needs at least one residual block");
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (n_mels < 1) throw ConfigError("n_mels must be >= 1");
}

const ParamEntry &ModelParams::Entry(const std::string &name) const {
  for (const auto &e : layout)
    if (e.name == name) return e;
  throw ConfigError("no parameter named " + name);
}

std::span<float> ModelParams::Tensor(const std::string &name) {
  const auto &e = Entry(name);
  return {values.data() + e.offset, e.size};
}

std::span<const float> ModelParams::Tensor(const std::string &name) const {
  const auto &e = Entry(name);
  return {values.data() + e.offset, e.size};
}

size_t ModelParams::NumTrainable() const {
  size_t n = 0;
  for (const auto &e : layout)
    if (e.trainable) n += e.size;
  return n;
}

ModelParams InitParams(const ModelConfig &config, uint64_t seed, const InitOptions &opts) {
  ModelParams params;
  params.config = config;
  params.layout = BuildParamLayout(config);
  const auto &last = params.layout.back();
  params.values.assign(last.offset + last.size, 0.0f);
  Rng rng(DeriveSeed(seed, "model/init"));
  auto ends_with = [](const std::string &s, const char *suffix) {
    return s.ends_with(suffix);
  };
  for (const auto &e : params.layout) {
    float *v = params.values.data() + e.offset;
    if (e.name == "head.weight") {
      if (opts.zero_final_affine) continue;
      const double stddev = 1.0 / std::sqrt(static_cast<double>(e.dims[1]));
      for (size_t j = 0; j < e.size; ++j) v[j] = static_cast<float>(0.1 * stddev * rng.Gaussian());
    } else if (e.name == "head.bias") {
      if (opts.zero_final_affine) continue;
      v[1] = v[2] = static_cast<float>(opts.mos_bias);
    } else if (e.dims.size() == 4) {
      const double fan_in = static_cast<double>(e.dims[1]) * e.dims[2] * e.dims[3];
      const double stddev = std::sqrt(2.0 / fan_in);
      for (size_t j = 0; j < e.size; ++j) v[j] = static_cast<float>(stddev * rng.Gaussian());
    } else if (ends_with(e.name, ".weight") || ends_with(e.name, ".running_var")) {
      std::fill(v, v + e.size, 1.0f);
    }
  }
  return params;
}

FusedFeature Fuse(const MelSpec &x1, const MelSpec &x2, float pad_value) {
  if (x1.n_mels != x2.n_mels)
    throw ShapeError("cannot fuse features with " + std::to_string(x1.n_mels) + " and " +
                     std::to_string(x2.n_mels) + " mel bins");
  FusedFeature f;
  f.frames = std::max(x1.frames, x2.frames);
  f.n_mels = x1.n_mels;
  const size_t plane = static_cast<size_t>(f.frames) * f.n_mels;
  f.data.assign(2 * plane, pad_value);
  std::copy(x1.data.begin(), x1.data.end(), f.data.begin());
  std::copy(x2.data.begin(), x2.data.end(), f.data.begin() + plane);
  return f;
}

namespace {

double Logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

template <typename Real>
ComparisonResult ToResult(const std::array<Real, 3> &out) {
  return {Logistic(out[0]), static_cast<double>(out[1]), static_cast<double>(out[2])};
}

// Inputs of unequal length inside one batch are padded with the silence
// floor of the default front end.
float DefaultPadValue() { return static_cast<float>(std::log(StftConfig{}.floor_eps)); }

}  // namespace

std::vector<ComparisonResult> ForwardBatch(const ModelParams &params,
                                           std::span<const FusedFeature *const> batch) {
  if (batch.empty()) return {};
  Network<float> net(params.config);
  const auto input = PackBatch<float>(batch, DefaultPadValue());
  const auto outputs =
      net.Forward(params.values, input, BatchNormMode::kInference, /*keep_cache=*/false);
  std::vector<ComparisonResult> results;
  results.reserve(outputs.size());
  for (const auto &o : outputs) results.push_back(ToResult(o));
  return results;
}

ComparisonResult Forward(const ModelParams &params, const FusedFeature &fused) {
  const FusedFeature *one[] = {&fused};
  return ForwardBatch(params, one).front();
}

LossValue Loss(const ComparisonResult &result, const LabeledPair &pair, double alpha,
               double beta) {
  constexpr double kClamp = 1e-7;
  const double t = pair.target ? 1.0 : 0.0;
  const double s = result.score_cp;
  const double sc = std::clamp(s, kClamp, 1.0 - kClamp);
  LossValue v;
  v.cp = -(t * std::log(sc) + (1.0 - t) * std::log(1.0 - sc));
  const double e1 = result.mos_pre_1 - pair.mos_a;
  const double e2 = result.mos_pre_2 - pair.mos_b;
  v.sc = 0.5 * (e1 * e1 + e2 * e2);
  v.total = alpha * v.cp + beta * v.sc;
  // BCE through the logistic collapses to (s - t); the clamp kills it.
  const bool clamped = s < kClamp || s > 1.0 - kClamp;
  v.d_outputs[0] = clamped ? 0.0 : alpha * (s - t);
  v.d_outputs[1] = beta * e1;
  v.d_outputs[2] = beta * e2;
  return v;
}

BatchGradient Backward(const ModelParams &params, std::span<const FusedFeature> fused,
                       std::span<const LabeledPair> pairs, double alpha, double beta,
                       BatchNormMode mode) {
  if (fused.size() != pairs.size()) throw ShapeError("one label needed per fused input");
  if (fused.empty()) throw ConfigError("empty batch");
  std::vector<const FusedFeature *> ptrs;
  for (const auto &f : fused) ptrs.push_back(&f);
  Network<double> net(params.config);
  std::vector<double> p(params.values.begin(), params.values.end());
  const auto input = PackBatch<double>(ptrs, DefaultPadValue());
  const auto outputs = net.Forward(p, input, mode, /*keep_cache=*/true);

  BatchGradient bg;
  bg.gradient.assign(p.size(), 0.0);
  std::vector<Network<double>::Output> d_out(outputs.size());
  const double inv_b = 1.0 / static_cast<double>(outputs.size());
  for (size_t b = 0; b < outputs.size(); ++b) {
    const auto r = ToResult(outputs[b]);
    const auto lv = Loss(r, pairs[b], alpha, beta);
    bg.loss += lv.total * inv_b;
    for (int o = 0; o < 3; ++o) d_out[b][o] = lv.d_outputs[o] * inv_b;
    bg.results.push_back(r);
  }
  if (!std::isfinite(bg.loss)) throw NumericError("non-finite loss");
  net.Backward(p, d_out, bg.gradient);
  for (double g : bg.gradient)
    if (!std::isfinite(g)) throw NumericError("non-finite gradient");
  return bg;
}

FeatureBank ComputeFeatureBank(const SystemSet &set, const StftConfig &stft, int n_mels) {
  LogMelExtractor extractor(stft, n_mels);
  FeatureBank bank(set.num_systems());
  for (size_t s = 0; s < set.num_systems(); ++s) {
    bank[s].reserve(set.num_utterances());
    for (const auto &clip : set.clips[s]) bank[s].push_back(extractor.Compute(clip));
  }
  return bank;
}

namespace {

FusedFeature FusePair(const FeatureBank &bank, const LabeledPair &p, float pad_value) {
  return Fuse(bank.at(p.system_a_index).at(p.utterance_index),
              bank.at(p.system_b_index).at(p.utterance_index), pad_value);
}

// Inference-mode outputs for a list of pairs, evaluated in chunks.
std::vector<ComparisonResult> PredictPairs(Network<float> &net, const ModelParams &params,
                                           const FeatureBank &bank, const PairSet &pairs,
                                           float pad_value) {
  constexpr size_t kChunk = 32;
  std::vector<ComparisonResult> out;
  out.reserve(pairs.size());
  for (size_t start = 0; start < pairs.size(); start += kChunk) {
    const size_t end = std::min(pairs.size(), start + kChunk);
    std::vector<FusedFeature> fused;
    for (size_t j = start; j < end; ++j) fused.push_back(FusePair(bank, pairs.pairs[j], pad_value));
    std::vector<const FusedFeature *> ptrs;
    for (const auto &f : fused) ptrs.push_back(&f);
    const auto input = PackBatch<float>(ptrs, pad_value);
    for (const auto &o : net.Forward(params.values, input, BatchNormMode::kInference, false))
      out.push_back(ToResult(o));
  }
  return out;
}

}  // namespace

double EvaluatePairLoss(const ModelParams &params, const FeatureBank &features,
                        const PairSet &pairs, double alpha, double beta, float pad_value) {
  if (pairs.empty()) return 0.0;
  Network<float> net(params.config);
  const auto results = PredictPairs(net, params, features, pairs, pad_value);
  double total = 0.0;
  for (size_t j = 0; j < results.size(); ++j)
    total += Loss(results[j], pairs.pairs[j], alpha, beta).total;
  return total / static_cast<double>(results.size());
}

double PairAccuracy(const ModelParams &params, const FeatureBank &features,
                    const PairSet &pairs, float pad_value) {
  if (pairs.empty()) throw ConfigError("pair accuracy of an empty pair set");
  Network<float> net(params.config);
  const auto results = PredictPairs(net, params, features, pairs, pad_value);
  size_t correct = 0;
  for (size_t j = 0; j < results.size(); ++j)
    if ((results[j].score_cp > 0.5) == (pairs.pairs[j].target == 1)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(results.size());
}

// ---------------------------------------------------------------------------
// Training.

namespace {

class Optimizer {
 public:
  Optimizer(const ModelParams &params, const TrainConfig &cfg) : cfg_(cfg) {
    for (const auto &e : params.layout)
      if (e.trainable)
        for (size_t j = 0; j < e.size; ++j) index_.push_back(e.offset + j);
    m_.assign(index_.size(), 0.0);
    if (cfg.optimizer == OptimizerKind::kAdamW) v_.assign(index_.size(), 0.0);
  }

  void Step(std::vector<float> &values, const std::vector<float> &grad) {
    ++step_;
    const double lr = cfg_.learning_rate, wd = cfg_.weight_decay;
    if (cfg_.optimizer == OptimizerKind::kAdamW) {
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double c1 = 1.0 - std::pow(b1, step_), c2 = 1.0 - std::pow(b2, step_);
      for (size_t j = 0; j < index_.size(); ++j) {
        const size_t i = index_[j];
        const double g = grad[i];
        m_[j] = b1 * m_[j] + (1 - b1) * g;
        v_[j] = b2 * v_[j] + (1 - b2) * g * g;
        const double update = (m_[j] / c1) / (std::sqrt(v_[j] / c2) + eps);
        values[i] = static_cast<float>(values[i] - lr * (update + wd * values[i]));
      }
    } else {
      for (size_t j = 0; j < index_.size(); ++j) {
        const size_t i = index_[j];
        m_[j] = cfg_.momentum * m_[j] + grad[i];
        values[i] = static_cast<float>(values[i] - lr * (m_[j] + wd * values[i]));
      }
    }
  }

 private:
  TrainConfig cfg_;
  std::vector<size_t> index_;
  std::vector<double> m_, v_;
  long step_ = 0;
};

}  // namespace

TrainResult Train(const SystemSet &train_set, const PairSet &train_pairs,
                  const SystemSet &val_set, const PairSet &val_pairs, const TrainConfig &cfg,
                  const EpochCallback &on_epoch) {
  return Train(train_set, train_pairs, val_set, val_pairs, cfg,
               InitParams(cfg.model, cfg.seed, cfg.init), on_epoch);
}

TrainResult Train(const SystemSet &train_set, const PairSet &train_pairs,
                  const SystemSet &val_set, const PairSet &val_pairs, const TrainConfig &cfg,
                  ModelParams params, const EpochCallback &on_epoch) {
  if (train_pairs.empty()) throw ConfigError("training pair set is empty");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.keep_checkpoints < 1) throw ConfigError("must keep at least one checkpoint");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");

  const int n_mels = params.config.n_mels;
  const float pad = static_cast<float>(std::log(cfg.stft.floor_eps));
  const FeatureBank train_bank = ComputeFeatureBank(train_set, cfg.stft, n_mels);
  const FeatureBank val_bank =
      val_pairs.empty() ? FeatureBank{} : ComputeFeatureBank(val_set, cfg.stft, n_mels);

  Network<float> net(params.config);
  Optimizer opt(params, cfg);
  std::vector<float> grad(params.values.size());
  Rng shuffle_rng(DeriveSeed(cfg.seed, "train/shuffle"));

  std::vector<size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), 0);

  // Runs one pass; updates parameters only when `update` is set.
  auto run_pass = [&](const std::vector<size_t> &ord, bool update) {
    double total = 0.0;
    size_t count = 0;
    for (size_t start = 0; start < ord.size(); start += cfg.batch_size) {
      const size_t end = std::min(ord.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<FusedFeature> fused;
      for (size_t j = start; j < end; ++j)
        fused.push_back(FusePair(train_bank, train_pairs.pairs[ord[j]], pad));
      std::vector<const FusedFeature *> ptrs;
      for (const auto &f : fused) ptrs.push_back(&f);
      const auto input = PackBatch<float>(ptrs, pad);
      const auto outputs = net.Forward(params.values, input, BatchNormMode::kTrain, update);
      std::vector<Network<float>::Output> d_out(outputs.size());
      const double inv_b = 1.0 / static_cast<double>(outputs.size());
      for (size_t b = 0; b < outputs.size(); ++b) {
        const auto lv = Loss(ToResult(outputs[b]), train_pairs.pairs[ord[start + b]], cfg.alpha,
                             cfg.beta);
        total += lv.total;
        for (int o = 0; o < 3; ++o) d_out[b][o] = static_cast<float>(lv.d_outputs[o] * inv_b);
      }
      count += outputs.size();
      if (!std::isfinite(total)) throw NumericError("training loss became non-finite");
      if (update) {
        std::fill(grad.begin(), grad.end(), 0.0f);
        net.Backward(params.values, d_out, grad);
        net.UpdateRunningStats(params.values, kBatchNormMomentum);
        opt.Step(params.values, grad);
      }
    }
    return total / static_cast<double>(count);
  };

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.Shuffle(order);
    if (epoch == 1) result.initial_train_loss = run_pass(order, /*update=*/false);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = run_pass(order, /*update=*/true);
    for (float v : params.values)
      if (!std::isfinite(v)) throw NumericError("parameters became non-finite");
    log.val_loss = val_pairs.empty()
                       ? log.train_loss
                       : EvaluatePairLoss(params, val_bank, val_pairs, cfg.alpha, cfg.beta, pad);
    result.log.push_back(log);
    if (on_epoch) on_epoch(log, params);

    Checkpoint ck{epoch, log.val_loss, log.train_loss, params};
    auto pos = std::upper_bound(
        result.checkpoints.begin(), result.checkpoints.end(), ck,
        [](const Checkpoint &a, const Checkpoint &b) { return a.val_loss < b.val_loss; });
    result.checkpoints.insert(pos, std::move(ck));
    if (result.checkpoints.size() > static_cast<size_t>(cfg.keep_checkpoints))
      result.checkpoints.pop_back();
  }
  result.final_params = std::move(params);
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint files.

namespace {

constexpr char kCheckpointMagic[4] = {'P', 'K', 'C', 'K'};
constexpr uint32_t kCheckpointVersion = 1;

void PutU32(std::string &out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string &bytes, const std::string &path) : b_(bytes), path_(path) {}
  uint32_t U32() {
    Need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string Bytes(size_t n) {
    Need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool AtEnd() const { return pos_ == b_.size(); }

 private:
  void Need(size_t n) {
    if (b_.size() - pos_ < n) throw FormatError(path_ + ": truncated checkpoint");
  }
  const std::string &b_;
  const std::string &path_;
  size_t pos_ = 0;
};

}  // namespace

void SaveCheckpoint(const ModelParams &params, const std::string &path) {
  std::string out(kCheckpointMagic, 4);
  PutU32(out, kCheckpointVersion);
  for (int n : params.config.block_counts) PutU32(out, static_cast<uint32_t>(n));
  PutU32(out, static_cast<uint32_t>(params.config.base_channels));
  PutU32(out, static_cast<uint32_t>(params.config.n_mels));
  PutU32(out, params.config.desk_profile ? 1u : 0u);
  PutU32(out, static_cast<uint32_t>(params.layout.size()));
  for (const auto &e : params.layout) {
    PutU32(out, static_cast<uint32_t>(e.name.size()));
    out += e.name;
    PutU32(out, static_cast<uint32_t>(e.dims.size()));
    for (int d : e.dims) PutU32(out, static_cast<uint32_t>(d));
    for (size_t j = 0; j < e.size; ++j) {
      uint32_t bits;
      std::memcpy(&bits, &params.values[e.offset + j], 4);
      PutU32(out, bits);
    }
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw IoError("write failed: " + path);
}

ModelParams LoadCheckpoint(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Reader r(bytes, path);
  if (r.Bytes(4) != std::string(kCheckpointMagic, 4)) throw FormatError(path + ": not a checkpoint");
  const uint32_t version = r.U32();
  if (version != kCheckpointVersion)
    throw UnsupportedFormatError(path + ": checkpoint version " + std::to_string(version));
  ModelParams params;
  for (int &n : params.config.block_counts) n = static_cast<int>(r.U32());
  params.config.base_channels = static_cast<int>(r.U32());
  params.config.n_mels = static_cast<int>(r.U32());
  params.config.desk_profile = r.U32() != 0;
  try {
    params.layout = BuildParamLayout(params.config);
  } catch (const ConfigError &e) {
    throw FormatError(path + ": invalid model config: " + e.what());
  }
  const uint32_t count = r.U32();
  if (count != params.layout.size())
    throw FormatError(path + ": expected " + std::to_string(params.layout.size()) +
                      " tensors, found " + std::to_string(count));
  const auto &last = params.layout.back();
  params.values.assign(last.offset + last.size, 0.0f);
  for (const auto &e : params.layout) {
    const std::string name = r.Bytes(r.U32());
    if (name != e.name) throw FormatError(path + ": unexpected tensor " + name);
    const uint32_t rank = r.U32();
    std::vector<int> dims(rank);
    for (auto &d : dims) d = static_cast<int>(r.U32());
    if (dims != e.dims) throw FormatError(path + ": shape mismatch for " + name);
    for (size_t j = 0; j < e.size; ++j) {
      const uint32_t bits = r.U32();
      std::memcpy(&params.values[e.offset + j], &bits, 4);
    }
  }
  if (!r.AtEnd()) throw FormatError(path + ": trailing bytes in checkpoint");
  return params;
}

}  // namespace pkrank
