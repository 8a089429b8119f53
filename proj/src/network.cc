// pkrank/network.cc

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

#include "pkrank/network.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <map>

namespace pkrank {

// ---------------------------------------------------------------------------
// Parameter layout.

namespace {

void AddEntry(std::vector<ParamEntry> &layout, size_t &offset, std::string name,
              std::vector<int> dims, bool trainable = true) {
  size_t size = 1;
  for (int d : dims) size *= static_cast<size_t>(d);
  layout.push_back({std::move(name), std::move(dims), offset, size, trainable});
  offset += size;
}

void AddBatchNorm(std::vector<ParamEntry> &layout, size_t &offset, const std::string &prefix,
                  int channels) {
  AddEntry(layout, offset, prefix + ".weight", {channels});
  AddEntry(layout, offset, prefix + ".bias", {channels});
  AddEntry(layout, offset, prefix + ".running_mean", {channels}, false);
  AddEntry(layout, offset, prefix + ".running_var", {channels}, false);
}

std::string BlockPrefix(int stage, int block) {
  return "stage" + std::to_string(stage + 1) + ".block" + std::to_string(block + 1);
}

bool BlockDownsamples(int stage, int block) { return stage > 0 && block == 0; }

}  // namespace

std::vector<ParamEntry> BuildParamLayout(const ModelConfig &config) {
  config.Check();
  std::vector<ParamEntry> layout;
  size_t offset = 0;
  const int c0 = config.base_channels;
  AddEntry(layout, offset, "stem.conv.weight", {c0, 2, 3, 3});
  AddBatchNorm(layout, offset, "stem.bn", c0);
  int cin = c0;
  for (int s = 0; s < 4; ++s) {
    const int cout = config.StageChannels(s);
    for (int b = 0; b < config.block_counts[s]; ++b) {
      const auto prefix = BlockPrefix(s, b);
      AddEntry(layout, offset, prefix + ".conv1.weight", {cout, cin, 3, 3});
      AddBatchNorm(layout, offset, prefix + ".bn1", cout);
      AddEntry(layout, offset, prefix + ".conv2.weight", {cout, cout, 3, 3});
      AddBatchNorm(layout, offset, prefix + ".bn2", cout);
      if (BlockDownsamples(s, b) || cin != cout) {
        AddEntry(layout, offset, prefix + ".shortcut.conv.weight", {cout, cin, 1, 1});
        AddBatchNorm(layout, offset, prefix + ".shortcut.bn", cout);
      }
      cin = cout;
    }
  }
  AddEntry(layout, offset, "head.weight", {3, config.PooledDim()});
  AddEntry(layout, offset, "head.bias", {3});
  return layout;
}

// ---------------------------------------------------------------------------
// Batch packing.

template <typename Real>
NetInput<Real> PackBatch(std::span<const FusedFeature *const> items, float pad_value) {
  NetInput<Real> in;
  if (items.empty()) return in;
  in.batch = static_cast<int>(items.size());
  in.n_mels = items[0]->n_mels;
  for (const auto *f : items) {
    if (f->n_mels != in.n_mels) throw ShapeError("batch mixes different mel counts");
    in.frames = std::max(in.frames, f->frames);
  }
  const size_t plane = static_cast<size_t>(in.frames) * in.n_mels;
  in.data.assign(static_cast<size_t>(in.batch) * 2 * plane, static_cast<Real>(pad_value));
  for (int b = 0; b < in.batch; ++b) {
    const auto *f = items[b];
    for (int c = 0; c < 2; ++c) {
      Real *dst = in.data.data() + (static_cast<size_t>(b) * 2 + c) * plane;
      const float *src = f->data.data() + static_cast<size_t>(c) * f->frames * f->n_mels;
      for (size_t j = 0; j < static_cast<size_t>(f->frames) * f->n_mels; ++j)
        dst[j] = static_cast<Real>(src[j]);
    }
  }
  return in;
}

template NetInput<float> PackBatch<float>(std::span<const FusedFeature *const>, float);
template NetInput<double> PackBatch<double>(std::span<const FusedFeature *const>, float);

// ---------------------------------------------------------------------------
// Engine.

namespace {

// Eigen picks its vectorized code path from the operands' addresses, so
// buffers fed to it are over-aligned to keep summation order, and with it
// training, reproducible from run to run.
template <typename Real>
using AlignedVec = std::vector<Real, Eigen::aligned_allocator<Real>>;

template <typename Real>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  AlignedVec<Real> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, Real(0)) {}
  size_t plane() const { return static_cast<size_t>(h) * w; }
  size_t sample() const { return static_cast<size_t>(c) * h * w; }
  Real *at(int b, int ch) { return v.data() + static_cast<size_t>(b) * sample() + ch * plane(); }
  const Real *at(int b, int ch) const {
    return v.data() + static_cast<size_t>(b) * sample() + ch * plane();
  }
};

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MapMat = Eigen::Map<RowMat<Real>>;
template <typename Real>
using ConstMapMat = Eigen::Map<const RowMat<Real>>;

struct ConvSpec {
  int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
  size_t weight = 0;
};

struct BnSpec {
  int channels = 0;
  size_t gamma = 0, beta = 0, mean = 0, var = 0;
};

struct BlockSpec {
  ConvSpec conv1, conv2, shortcut;
  BnSpec bn1, bn2, shortcut_bn;
  bool projection = false;
};

int ConvOut(int size, const ConvSpec &s) { return (size + 2 * s.pad - s.k) / s.stride + 1; }

template <typename Real>
void Im2Col(const Real *x, int cin, int h, int w, const ConvSpec &s, int ho, int wo,
            Real *col) {
  const size_t cols = static_cast<size_t>(ho) * wo;
  for (int ci = 0; ci < cin; ++ci) {
    const Real *xc = x + static_cast<size_t>(ci) * h * w;
    for (int ki = 0; ki < s.k; ++ki) {
      for (int kj = 0; kj < s.k; ++kj) {
        Real *row = col + ((static_cast<size_t>(ci) * s.k + ki) * s.k + kj) * cols;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * s.stride - s.pad + ki;
          Real *dst = row + static_cast<size_t>(oh) * wo;
          if (ih < 0 || ih >= h) {
            std::fill(dst, dst + wo, Real(0));
            continue;
          }
          const Real *src = xc + static_cast<size_t>(ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * s.stride - s.pad + kj;
            dst[ow] = (iw >= 0 && iw < w) ? src[iw] : Real(0);
          }
        }
      }
    }
  }
}

template <typename Real>
void Col2Im(const Real *col, int cin, int h, int w, const ConvSpec &s, int ho, int wo,
            Real *dx) {
  const size_t cols = static_cast<size_t>(ho) * wo;
  for (int ci = 0; ci < cin; ++ci) {
    Real *xc = dx + static_cast<size_t>(ci) * h * w;
    for (int ki = 0; ki < s.k; ++ki) {
      for (int kj = 0; kj < s.k; ++kj) {
        const Real *row = col + ((static_cast<size_t>(ci) * s.k + ki) * s.k + kj) * cols;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * s.stride - s.pad + ki;
          if (ih < 0 || ih >= h) continue;
          const Real *src = row + static_cast<size_t>(oh) * wo;
          Real *dst = xc + static_cast<size_t>(ih) * w;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * s.stride - s.pad + kj;
            if (iw >= 0 && iw < w) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

template <typename Real>
Tensor4<Real> ConvForward(const Tensor4<Real> &x, const ConvSpec &s, const Real *weight,
                          AlignedVec<Real> &scratch) {
  const int ho = ConvOut(x.h, s), wo = ConvOut(x.w, s);
  Tensor4<Real> y(x.n, s.cout, ho, wo);
  const int kdim = s.cin * s.k * s.k;
  const int cols = ho * wo;
  scratch.resize(static_cast<size_t>(kdim) * cols);
  ConstMapMat<Real> wm(weight, s.cout, kdim);
  for (int b = 0; b < x.n; ++b) {
    Im2Col(x.at(b, 0), s.cin, x.h, x.w, s, ho, wo, scratch.data());
    ConstMapMat<Real> cm(scratch.data(), kdim, cols);
    MapMat<Real> ym(y.at(b, 0), s.cout, cols);
    ym.noalias() = wm * cm;
  }
  return y;
}

// Accumulates the kernel gradient into dweight and returns dL/dx.
template <typename Real>
Tensor4<Real> ConvBackward(const Tensor4<Real> &x, const Tensor4<Real> &dy, const ConvSpec &s,
                           const Real *weight, Real *dweight, AlignedVec<Real> &scratch,
                           AlignedVec<Real> &scratch2) {
  const int ho = dy.h, wo = dy.w;
  const int kdim = s.cin * s.k * s.k;
  const int cols = ho * wo;
  Tensor4<Real> dx(x.n, x.c, x.h, x.w);
  scratch.resize(static_cast<size_t>(kdim) * cols);
  scratch2.resize(static_cast<size_t>(kdim) * cols);
  ConstMapMat<Real> wm(weight, s.cout, kdim);
  MapMat<Real> dwm(dweight, s.cout, kdim);
  for (int b = 0; b < x.n; ++b) {
    Im2Col(x.at(b, 0), s.cin, x.h, x.w, s, ho, wo, scratch.data());
    ConstMapMat<Real> cm(scratch.data(), kdim, cols);
    ConstMapMat<Real> dym(dy.at(b, 0), s.cout, cols);
    dwm.noalias() += dym * cm.transpose();
    MapMat<Real> dcol(scratch2.data(), kdim, cols);
    dcol.noalias() = wm.transpose() * dym;
    Col2Im(scratch2.data(), s.cin, x.h, x.w, s, ho, wo, dx.at(b, 0));
  }
  return dx;
}

template <typename Real>
struct BnCache {
  std::vector<Real> xhat;
  std::vector<Real> inv_std;
  // Batch statistics for the running-average update (train mode only).
  std::vector<double> batch_mean;
  std::vector<double> batch_var_unbiased;
  bool train = false;
};

template <typename Real>
Tensor4<Real> BnForward(const Tensor4<Real> &x, const BnSpec &s, const Real *params,
                        BatchNormMode mode, BnCache<Real> *cache) {
  Tensor4<Real> y(x.n, x.c, x.h, x.w);
  const size_t plane = x.plane();
  const double count = static_cast<double>(x.n) * plane;
  const Real *gamma = params + s.gamma;
  const Real *beta = params + s.beta;
  std::vector<Real> inv_std(x.c);
  std::vector<double> mean(x.c), var(x.c);
  if (mode == BatchNormMode::kTrain) {
    for (int c = 0; c < x.c; ++c) {
      double sum = 0.0;
      for (int b = 0; b < x.n; ++b) {
        const Real *p = x.at(b, c);
        for (size_t j = 0; j < plane; ++j) sum += p[j];
      }
      const double mu = sum / count;
      double sq = 0.0;
      for (int b = 0; b < x.n; ++b) {
        const Real *p = x.at(b, c);
        for (size_t j = 0; j < plane; ++j) {
          const double d = p[j] - mu;
          sq += d * d;
        }
      }
      mean[c] = mu;
      var[c] = sq / count;
    }
  } else {
    for (int c = 0; c < x.c; ++c) {
      mean[c] = params[s.mean + c];
      var[c] = params[s.var + c];
    }
  }
  if (cache) {
    cache->xhat.resize(x.v.size());
    cache->train = mode == BatchNormMode::kTrain;
    if (cache->train) {
      cache->batch_mean = mean;
      cache->batch_var_unbiased.resize(x.c);
      for (int c = 0; c < x.c; ++c)
        cache->batch_var_unbiased[c] = count > 1 ? var[c] * count / (count - 1) : var[c];
    }
  }
  for (int c = 0; c < x.c; ++c) {
    inv_std[c] = static_cast<Real>(1.0 / std::sqrt(var[c] + kBatchNormEps));
    const Real mu = static_cast<Real>(mean[c]);
    for (int b = 0; b < x.n; ++b) {
      const Real *p = x.at(b, c);
      Real *q = y.at(b, c);
      Real *xh = cache ? cache->xhat.data() + (p - x.v.data()) : nullptr;
      for (size_t j = 0; j < plane; ++j) {
        const Real h = (p[j] - mu) * inv_std[c];
        if (xh) xh[j] = h;
        q[j] = gamma[c] * h + beta[c];
      }
    }
  }
  if (cache) cache->inv_std = std::move(inv_std);
  return y;
}

template <typename Real>
Tensor4<Real> BnBackward(const Tensor4<Real> &dy, const BnSpec &s, const Real *params,
                         const BnCache<Real> &cache, Real *grad) {
  Tensor4<Real> dx(dy.n, dy.c, dy.h, dy.w);
  const size_t plane = dy.plane();
  const double count = static_cast<double>(dy.n) * plane;
  const Real *gamma = params + s.gamma;
  for (int c = 0; c < dy.c; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < dy.n; ++b) {
      const size_t off = static_cast<size_t>(b) * dy.sample() + c * plane;
      for (size_t j = 0; j < plane; ++j) {
        sum_dy += dy.v[off + j];
        sum_dy_xhat += static_cast<double>(dy.v[off + j]) * cache.xhat[off + j];
      }
    }
    grad[s.gamma + c] += static_cast<Real>(sum_dy_xhat);
    grad[s.beta + c] += static_cast<Real>(sum_dy);
    const double g = static_cast<double>(gamma[c]) * cache.inv_std[c];
    for (int b = 0; b < dy.n; ++b) {
      const size_t off = static_cast<size_t>(b) * dy.sample() + c * plane;
      for (size_t j = 0; j < plane; ++j) {
        if (cache.train) {
          dx.v[off + j] = static_cast<Real>(
              g * (dy.v[off + j] - sum_dy / count - cache.xhat[off + j] * sum_dy_xhat / count));
        } else {
          dx.v[off + j] = static_cast<Real>(g * dy.v[off + j]);
        }
      }
    }
  }
  return dx;
}

template <typename Real>
void ReluInPlace(Tensor4<Real> &x) {
  for (auto &v : x.v) v = v > Real(0) ? v : Real(0);
}

// Zeroes dy where the forward output was not positive.
template <typename Real>
void ReluBackwardInPlace(Tensor4<Real> &dy, const Tensor4<Real> &out) {
  for (size_t j = 0; j < dy.v.size(); ++j)
    if (!(out.v[j] > Real(0))) dy.v[j] = Real(0);
}

}  // namespace

template <typename Real>
struct Network<Real>::Impl {
  ModelConfig config;
  ConvSpec stem_conv;
  BnSpec stem_bn;
  std::vector<BlockSpec> blocks;
  size_t head_weight = 0, head_bias = 0;
  int pooled_dim = 0;

  // Forward cache.
  struct BlockCache {
    Tensor4<Real> in, a1, r1, a2, s, out;
    BnCache<Real> bn1, bn2, sbn;
  };
  Tensor4<Real> input, stem_a, stem_out;
  BnCache<Real> stem_cache;
  std::vector<BlockCache> block_cache;
  AlignedVec<Real> pooled;  // (B, pooled_dim)
  std::vector<Real> pool_mean;
  bool have_cache = false;
  BatchNormMode cache_mode = BatchNormMode::kInference;
  std::array<int, 4> last_shape = {0, 0, 0, 0};

  AlignedVec<Real> scratch, scratch2;
  // Aligned copies of the caller's parameters and gradient.
  AlignedVec<Real> params, grad;
};

template <typename Real>
Network<Real>::Network(const ModelConfig &config) : impl_(std::make_unique<Impl>()) {
  auto &im = *impl_;
  im.config = config;
  const auto layout = BuildParamLayout(config);
  std::map<std::string, size_t> off;
  for (const auto &e : layout) off[e.name] = e.offset;
  auto bn = [&](const std::string &p, int ch) {
    return BnSpec{ch, off.at(p + ".weight"), off.at(p + ".bias"), off.at(p + ".running_mean"),
                  off.at(p + ".running_var")};
  };
  const int c0 = config.base_channels;
  im.stem_conv = {2, c0, 3, 1, 1, off.at("stem.conv.weight")};
  im.stem_bn = bn("stem.bn", c0);
  int cin = c0;
  for (int s = 0; s < 4; ++s) {
    const int cout = config.StageChannels(s);
    for (int b = 0; b < config.block_counts[s]; ++b) {
      const auto prefix = BlockPrefix(s, b);
      const int stride = BlockDownsamples(s, b) ? 2 : 1;
      BlockSpec blk;
      blk.conv1 = {cin, cout, 3, stride, 1, off.at(prefix + ".conv1.weight")};
      blk.bn1 = bn(prefix + ".bn1", cout);
      blk.conv2 = {cout, cout, 3, 1, 1, off.at(prefix + ".conv2.weight")};
      blk.bn2 = bn(prefix + ".bn2", cout);
      blk.projection = stride != 1 || cin != cout;
      if (blk.projection) {
        blk.shortcut = {cin, cout, 1, stride, 0, off.at(prefix + ".shortcut.conv.weight")};
        blk.shortcut_bn = bn(prefix + ".shortcut.bn", cout);
      }
      im.blocks.push_back(blk);
      cin = cout;
    }
  }
  im.head_weight = off.at("head.weight");
  im.head_bias = off.at("head.bias");
  im.pooled_dim = config.PooledDim();
}

template <typename Real>
std::vector<Real> MeanVariancePool(std::span<const Real> x, int batch, int channels, int frames,
                                   int freqs) {
  if (x.size() != static_cast<size_t>(batch) * channels * frames * freqs)
    throw ShapeError("pooling input has the wrong size");
  if (frames < 1) throw ShapeError("pooling needs at least one frame");
  const int half = channels * freqs;
  std::vector<Real> pooled(static_cast<size_t>(batch) * 2 * half);
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      const Real *src = x.data() + (static_cast<size_t>(b) * channels + c) * frames * freqs;
      for (int f = 0; f < freqs; ++f) {
        // Shifting by the first frame keeps a constant track's variance
        // exactly zero.
        const double x0 = src[f];
        double sum = 0.0;
        for (int t = 0; t < frames; ++t) sum += src[static_cast<size_t>(t) * freqs + f] - x0;
        const double shift = sum / frames;
        const double mu = x0 + shift;
        double sq = 0.0;
        for (int t = 0; t < frames; ++t) {
          const double d = (src[static_cast<size_t>(t) * freqs + f] - x0) - shift;
          sq += d * d;
        }
        const size_t cell = static_cast<size_t>(c) * freqs + f;
        pooled[static_cast<size_t>(b) * 2 * half + cell] = static_cast<Real>(mu);
        pooled[static_cast<size_t>(b) * 2 * half + half + cell] = static_cast<Real>(sq / frames);
      }
    }
  }
  return pooled;
}

template std::vector<float> MeanVariancePool<float>(std::span<const float>, int, int, int, int);
template std::vector<double> MeanVariancePool<double>(std::span<const double>, int, int, int, int);

template <typename Real>
Network<Real>::~Network() = default;
template <typename Real>
Network<Real>::Network(Network &&) noexcept = default;
template <typename Real>
Network<Real> &Network<Real>::operator=(Network &&) noexcept = default;

template <typename Real>
const ModelConfig &Network<Real>::config() const {
  return impl_->config;
}

template <typename Real>
std::array<int, 4> Network<Real>::LastStageShape() const {
  return impl_->last_shape;
}

template <typename Real>
std::vector<typename Network<Real>::Output> Network<Real>::Forward(
    std::span<const Real> params, const NetInput<Real> &input, BatchNormMode mode,
    bool keep_cache) {
  auto &im = *impl_;
  if (input.frames < kMinFrames)
    throw TooShortError("network input has " + std::to_string(input.frames) +
                        " frames; at least " + std::to_string(kMinFrames) + " required");
  if (input.n_mels != im.config.n_mels)
    throw ShapeError("network expects " + std::to_string(im.config.n_mels) +
                     " mel bins, got " + std::to_string(input.n_mels));
  if (input.batch < 1) return {};
  im.params.assign(params.begin(), params.end());
  const Real *p = im.params.data();

  Tensor4<Real> x(input.batch, 2, input.frames, input.n_mels);
  x.v.assign(input.data.begin(), input.data.end());

  // Stem.
  BnCache<Real> stem_cache;
  Tensor4<Real> a = ConvForward(x, im.stem_conv, p + im.stem_conv.weight, im.scratch);
  Tensor4<Real> h = BnForward(a, im.stem_bn, p, mode, keep_cache ? &stem_cache : nullptr);
  ReluInPlace(h);
  if (keep_cache) {
    im.input = x;
    im.stem_a = std::move(a);
    im.stem_out = h;
    im.stem_cache = std::move(stem_cache);
    im.block_cache.assign(im.blocks.size(), {});
  }

  for (size_t bi = 0; bi < im.blocks.size(); ++bi) {
    const auto &blk = im.blocks[bi];
    typename Impl::BlockCache bc;
    BnCache<Real> *c1 = keep_cache ? &bc.bn1 : nullptr;
    BnCache<Real> *c2 = keep_cache ? &bc.bn2 : nullptr;
    BnCache<Real> *cs = keep_cache ? &bc.sbn : nullptr;

    Tensor4<Real> a1 = ConvForward(h, blk.conv1, p + blk.conv1.weight, im.scratch);
    Tensor4<Real> r1 = BnForward(a1, blk.bn1, p, mode, c1);
    ReluInPlace(r1);
    Tensor4<Real> a2 = ConvForward(r1, blk.conv2, p + blk.conv2.weight, im.scratch);
    Tensor4<Real> out = BnForward(a2, blk.bn2, p, mode, c2);
    if (blk.projection) {
      Tensor4<Real> s = ConvForward(h, blk.shortcut, p + blk.shortcut.weight, im.scratch);
      Tensor4<Real> sb = BnForward(s, blk.shortcut_bn, p, mode, cs);
      for (size_t j = 0; j < out.v.size(); ++j) out.v[j] += sb.v[j];
      if (keep_cache) bc.s = std::move(s);
    } else {
      for (size_t j = 0; j < out.v.size(); ++j) out.v[j] += h.v[j];
    }
    ReluInPlace(out);
    if (keep_cache) {
      bc.in = std::move(h);
      bc.a1 = std::move(a1);
      bc.r1 = std::move(r1);
      bc.a2 = std::move(a2);
      bc.out = out;
      im.block_cache[bi] = std::move(bc);
    }
    h = std::move(out);
  }
  im.last_shape = {h.n, h.c, h.h, h.w};

  const int B = h.n, half = h.c * h.w;
  const std::vector<Real> pooled_raw =
      MeanVariancePool<Real>(std::span<const Real>(h.v.data(), h.v.size()), h.n, h.c, h.h, h.w);
  AlignedVec<Real> pooled(pooled_raw.begin(), pooled_raw.end());
  std::vector<Real> means(static_cast<size_t>(B) * half);
  for (int b = 0; b < B; ++b)
    std::copy_n(pooled.begin() + static_cast<size_t>(b) * 2 * half, half,
                means.begin() + static_cast<size_t>(b) * half);
  if (2 * half != im.pooled_dim)
    throw ShapeError("pooled embedding has " + std::to_string(2 * half) + " values, head expects " +
                     std::to_string(im.pooled_dim));

  std::vector<Output> outputs(B);
  ConstMapMat<Real> wm(p + im.head_weight, 3, im.pooled_dim);
  for (int b = 0; b < B; ++b) {
    Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, 1>> v(
        pooled.data() + static_cast<size_t>(b) * im.pooled_dim, im.pooled_dim);
    Eigen::Matrix<Real, 3, 1> z = wm * v;
    for (int o = 0; o < 3; ++o) {
      outputs[b][o] = z(o) + p[im.head_bias + o];
      if (!std::isfinite(static_cast<double>(outputs[b][o])))
        throw NumericError("non-finite network output");
    }
  }
  if (keep_cache) {
    im.pooled = std::move(pooled);
    im.pool_mean = std::move(means);
    im.have_cache = true;
    im.cache_mode = mode;
  } else {
    im.have_cache = false;
  }
  return outputs;
}

template <typename Real>
void Network<Real>::Backward(std::span<const Real> params, std::span<const Output> d_outputs,
                             std::span<Real> grad) {
  auto &im = *impl_;
  if (!im.have_cache) throw ConfigError("Network::Backward called without a cached forward");
  if (grad.size() != params.size()) throw ShapeError("gradient and parameters differ in size");
  im.params.assign(params.begin(), params.end());
  im.grad.assign(grad.size(), Real(0));
  const Real *p = im.params.data();
  Real *g = im.grad.data();
  const Tensor4<Real> &last = im.block_cache.empty() ? im.stem_out : im.block_cache.back().out;
  const int B = last.n, C = last.c, T = last.h, F = last.w;
  const int half = C * F;
  if (static_cast<int>(d_outputs.size()) != B) throw ShapeError("d_outputs has wrong batch size");

  // Head.
  AlignedVec<Real> dpooled(static_cast<size_t>(B) * im.pooled_dim, Real(0));
  MapMat<Real> dwm(g + im.head_weight, 3, im.pooled_dim);
  ConstMapMat<Real> wm(p + im.head_weight, 3, im.pooled_dim);
  for (int b = 0; b < B; ++b) {
    Eigen::Matrix<Real, 3, 1> dz;
    for (int o = 0; o < 3; ++o) {
      dz(o) = d_outputs[b][o];
      g[im.head_bias + o] += d_outputs[b][o];
    }
    Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>> v(
        im.pooled.data() + static_cast<size_t>(b) * im.pooled_dim, im.pooled_dim);
    dwm.noalias() += dz * v;
    Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, 1>> dv(
        dpooled.data() + static_cast<size_t>(b) * im.pooled_dim, im.pooled_dim);
    dv.noalias() = wm.transpose() * dz;
  }

  // Pooling.
  Tensor4<Real> dh(B, C, T, F);
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const Real *src = last.at(b, c);
      Real *dst = dh.at(b, c);
      for (int f = 0; f < F; ++f) {
        const size_t cell = static_cast<size_t>(c) * F + f;
        const Real dmean = dpooled[static_cast<size_t>(b) * 2 * half + cell];
        const Real dvar = dpooled[static_cast<size_t>(b) * 2 * half + half + cell];
        const Real mu = im.pool_mean[static_cast<size_t>(b) * half + cell];
        for (int t = 0; t < T; ++t) {
          const size_t j = static_cast<size_t>(t) * F + f;
          dst[j] = dmean / T + dvar * Real(2) * (src[j] - mu) / T;
        }
      }
    }
  }

  // Residual stages, last to first.
  for (size_t bi = im.blocks.size(); bi-- > 0;) {
    const auto &blk = im.blocks[bi];
    const auto &bc = im.block_cache[bi];
    ReluBackwardInPlace(dh, bc.out);
    // Main path.
    Tensor4<Real> da2 = BnBackward(dh, blk.bn2, p, bc.bn2, g);
    Tensor4<Real> dr1 = ConvBackward(bc.r1, da2, blk.conv2, p + blk.conv2.weight,
                                     g + blk.conv2.weight, im.scratch, im.scratch2);
    ReluBackwardInPlace(dr1, bc.r1);
    Tensor4<Real> da1 = BnBackward(dr1, blk.bn1, p, bc.bn1, g);
    Tensor4<Real> din = ConvBackward(bc.in, da1, blk.conv1, p + blk.conv1.weight,
                                     g + blk.conv1.weight, im.scratch, im.scratch2);
    // Shortcut.
    if (blk.projection) {
      Tensor4<Real> ds = BnBackward(dh, blk.shortcut_bn, p, bc.sbn, g);
      Tensor4<Real> dsin = ConvBackward(bc.in, ds, blk.shortcut, p + blk.shortcut.weight,
                                        g + blk.shortcut.weight, im.scratch, im.scratch2);
      for (size_t j = 0; j < din.v.size(); ++j) din.v[j] += dsin.v[j];
    } else {
      for (size_t j = 0; j < din.v.size(); ++j) din.v[j] += dh.v[j];
    }
    dh = std::move(din);
  }

  // Stem.
  ReluBackwardInPlace(dh, im.stem_out);
  Tensor4<Real> da = BnBackward(dh, im.stem_bn, p, im.stem_cache, g);
  ConvBackward(im.input, da, im.stem_conv, p + im.stem_conv.weight, g + im.stem_conv.weight,
               im.scratch, im.scratch2);
  for (size_t j = 0; j < grad.size(); ++j) grad[j] += im.grad[j];
}

template <typename Real>
void Network<Real>::UpdateRunningStats(std::span<Real> params, double momentum) const {
  const auto &im = *impl_;
  if (!im.have_cache || im.cache_mode != BatchNormMode::kTrain) return;
  auto fold = [&](const BnSpec &s, const BnCache<Real> &c) {
    for (int ch = 0; ch < s.channels; ++ch) {
      Real &rm = params[s.mean + ch];
      Real &rv = params[s.var + ch];
      rm = static_cast<Real>((1.0 - momentum) * rm + momentum * c.batch_mean[ch]);
      rv = static_cast<Real>((1.0 - momentum) * rv + momentum * c.batch_var_unbiased[ch]);
    }
  };
  fold(im.stem_bn, im.stem_cache);
  for (size_t bi = 0; bi < im.blocks.size(); ++bi) {
    const auto &blk = im.blocks[bi];
    const auto &bc = im.block_cache[bi];
    fold(blk.bn1, bc.bn1);
    fold(blk.bn2, bc.bn2);
    if (blk.projection) fold(blk.shortcut_bn, bc.sbn);
  }
}

template class Network<float>;
template class Network<double>;

}  // namespace pkrank
