// pkrank/python/bindings.cc

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

// Thin Python surface over the core library.  Heavy calls release the GIL.

#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pkrank/audio.h"
#include "pkrank/comparators.h"
#include "pkrank/features.h"
#include "pkrank/metrics.h"
#include "pkrank/model.h"
#include "pkrank/pairs.h"
#include "pkrank/ranking.h"
#include "pkrank/selection.h"
#include "pkrank/sqa.h"

namespace py = pybind11;
using namespace pkrank;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> ToVector(const DoubleArray &a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-D array");
  return std::vector<double>(a.data(), a.data() + a.size());
}

AudioClip ToClip(py::array_t<float, py::array::c_style | py::array::forcecast> samples,
                 int rate) {
  if (samples.ndim() != 1) throw ShapeError("expected mono samples as a 1-D array");
  AudioClip clip;
  clip.samples.assign(samples.data(), samples.data() + samples.size());
  clip.sample_rate_hz = rate;
  return clip;
}

py::dict RankingDict(const RankingResult &r, const std::optional<CorrelationReport> &rep) {
  py::dict d;
  d["system_ids"] = r.system_ids;
  d["scores"] = r.scores;
  d["order"] = r.order;
  d["ranks"] = r.Ranks();
  d["strategy"] = StrategyName(r.strategy);
  d["comparator"] = r.comparator;
  d["comparisons"] = r.comparisons;
  if (rep) {
    d["lcc"] = rep->lcc;
    d["srcc"] = rep->srcc;
    d["krcc"] = rep->krcc;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_pkrank, m) {
  m.doc() = "Pairwise comparison ranking of speech enhancement systems";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<NumericError>(m, "NumericError", error.ptr());

  py::class_<SystemSet>(m, "SystemSet")
      .def_property_readonly("system_ids", [](const SystemSet &s) { return s.system_ids; })
      .def_property_readonly("utterance_ids", [](const SystemSet &s) { return s.utterance_ids; })
      .def_property_readonly("has_mos", &SystemSet::has_mos)
      .def_property_readonly("has_noisy", [](const SystemSet &s) { return s.noisy.has_value(); })
      .def("mean_mos", &SystemSet::MeanMos)
      .def("mos", [](const SystemSet &s) -> py::object {
        if (!s.mos) return py::none();
        return py::cast(*s.mos);
      })
      .def("clip", [](const SystemSet &s, size_t sys, size_t utt) {
        if (sys >= s.num_systems() || utt >= s.num_utterances())
          throw py::index_error("clip index out of range");
        const AudioClip &c = s.clips[sys][utt];
        return py::array_t<float>(c.samples.size(), c.samples.data());
      })
      .def("__len__", &SystemSet::num_systems)
      .def("__repr__", [](const SystemSet &s) {
        return "<SystemSet " + std::to_string(s.num_systems()) + " systems x " +
               std::to_string(s.num_utterances()) + " utterances>";
      });

  m.def(
      "synth",
      [](int k, int m, uint64_t seed, std::optional<std::string> grades, double duration_s,
         double mos_noise) {
        SynthOptions opts;
        opts.duration_s = duration_s;
        opts.mos_noise_std = mos_noise;
        const auto g = grades ? ParseGrades(*grades) : DefaultGrades(k);
        py::gil_scoped_release release;
        return SynthSystemSet(k, m, seed, g, opts);
      },
      py::arg("k"), py::arg("m"), py::arg("seed") = 0, py::arg("grades") = py::none(),
      py::arg("duration_s") = 0.5, py::arg("mos_noise") = 0.0,
      "Synthetic labelled set of k systems by m utterances.");

  m.def("load_set", &LoadSystemSet, py::arg("root"), py::call_guard<py::gil_scoped_release>());
  m.def(
      "save_set", [](SystemSet set, const std::string &root) { SaveSystemSet(set, root); },
      py::arg("set"), py::arg("root"));

  m.def(
      "log_mel",
      [](py::array_t<float, py::array::c_style | py::array::forcecast> samples, int rate,
         int n_mels) {
        const MelSpec spec = LogMel(ToClip(samples, rate), {}, n_mels);
        py::array_t<float> out({spec.frames, spec.n_mels});
        std::copy(spec.data.begin(), spec.data.end(), out.mutable_data());
        return out;
      },
      py::arg("samples"), py::arg("sample_rate") = kCanonicalRateHz,
      py::arg("n_mels") = kDefaultNumMels, "Log-mel spectrogram, frames x n_mels.");

  m.def("lcc", [](const DoubleArray &x, const DoubleArray &y) {
    return Lcc(ToVector(x), ToVector(y));
  });
  m.def("srcc", [](const DoubleArray &x, const DoubleArray &y) {
    return Srcc(ToVector(x), ToVector(y));
  });
  m.def("krcc", [](const DoubleArray &x, const DoubleArray &y) {
    return Krcc(ToVector(x), ToVector(y));
  });

  m.def(
      "rank",
      [](const SystemSet &set, const std::string &comparator, const std::string &strategy,
         bool include_noisy, int jobs) {
        const Strategy st = ParseStrategy(strategy);
        auto cmp = MakeComparator(comparator);
        const SystemSet work = include_noisy ? IncludeNoisySystem(set) : set;
        RankingResult r;
        std::optional<CorrelationReport> rep;
        {
          py::gil_scoped_release release;
          r = EcsRank(work, *cmp, st, jobs);
          if (work.has_mos()) rep = ReportAgainstMos(r, work);
        }
        return RankingDict(r, rep);
      },
      py::arg("set"), py::arg("comparator") = "oracle", py::arg("strategy") = "bs",
      py::arg("include_noisy") = false, py::arg("jobs") = 1,
      "Rank the systems of a set by exhaustive pairwise comparison.");

  m.def(
      "train",
      [](const SystemSet &set, int val_utts, double delta, int epochs, double lr, int batch,
         uint64_t seed, const std::string &optimizer, const std::string &profile) {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.learning_rate = lr;
        cfg.batch_size = batch;
        cfg.seed = seed;
        if (optimizer == "sgd") cfg.optimizer = OptimizerKind::kSgd;
        else if (optimizer != "adamw") throw ConfigError("unknown optimizer: " + optimizer);
        if (profile == "full") cfg.model = ModelConfig::Full();
        else if (profile != "desk") throw ConfigError("unknown profile: " + profile);
        py::gil_scoped_release release;
        const auto [train_set, val_set] = SplitValidation(set, val_utts, seed);
        const PairSet tr = BuildPairs(train_set, delta);
        const PairSet va = BuildPairs(val_set, delta, Split::kValidation);
        TrainResult res = Train(train_set, tr, val_set, va, cfg);
        const Selection sel = SelectCheckpoint(res.checkpoints, val_set);
        return res.checkpoints[sel.index].params;
      },
      py::arg("set"), py::arg("val_utts") = 8, py::arg("delta") = kDefaultDelta,
      py::arg("epochs") = 30, py::arg("lr") = 1e-4, py::arg("batch") = 12, py::arg("seed") = 0,
      py::arg("optimizer") = "adamw", py::arg("profile") = "desk",
      "Train a comparator and return the selected checkpoint's parameters.");

  py::class_<ModelParams>(m, "ModelParams")
      .def_property_readonly("num_values", [](const ModelParams &p) { return p.values.size(); })
      .def_property_readonly("num_trainable", &ModelParams::NumTrainable)
      .def("names", [](const ModelParams &p) {
        std::vector<std::string> out;
        for (const auto &e : p.layout) out.push_back(e.name);
        return out;
      })
      .def("tensor", [](const ModelParams &p, const std::string &name) {
        const auto t = p.Tensor(name);
        return py::array_t<float>(t.size(), t.data());
      })
      .def(py::self == py::self);

  m.def(
      "init_params",
      [](uint64_t seed, const std::string &profile) {
        return InitParams(profile == "full" ? ModelConfig::Full() : ModelConfig::Desk(), seed);
      },
      py::arg("seed") = 0, py::arg("profile") = "desk");
  m.def("save_checkpoint", &SaveCheckpoint, py::arg("params"), py::arg("path"));
  m.def("load_checkpoint", &LoadCheckpoint, py::arg("path"));

  m.def(
      "compare",
      [](const ModelParams &params, py::array_t<float, py::array::c_style | py::array::forcecast> a,
         py::array_t<float, py::array::c_style | py::array::forcecast> b) {
        ModelComparator cmp(params);
        const AudioClip ca = ToClip(a, kCanonicalRateHz), cb = ToClip(b, kCanonicalRateHz);
        ClipRef ra, rb;
        ra.clip = &ca;
        rb.clip = &cb;
        const ComparisonResult r = cmp.Compare(ra, rb);
        return py::make_tuple(r.score_cp, r.mos_pre_1, r.mos_pre_2);
      },
      py::arg("params"), py::arg("a"), py::arg("b"),
      "(score, mos_a, mos_b) for two 16 kHz clips.");

  m.def(
      "estimate_mos",
      [](const ModelParams &params, const SystemSet &set, const std::string &strategy) {
        const SqaStrategy st = ParseSqaStrategy(strategy);
        py::gil_scoped_release release;
        return EstimateSet(params, set, st).estimates;
      },
      py::arg("params"), py::arg("set"), py::arg("strategy") = "replication");
}
