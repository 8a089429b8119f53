// pkrank/comparators.h

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

#ifndef PKRANK_COMPARATORS_H_
#define PKRANK_COMPARATORS_H_

#include <sys/types.h>

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pkrank/audio.h"
#include "pkrank/model.h"

namespace pkrank {

/// What a comparator gets to see about one side of a comparison.  Not every
/// comparator uses every field: the oracle reads only `mos`, the model only
/// `clip`, the external endpoint only `path` (or a temporary copy of `clip`).
struct ClipRef {
  const AudioClip *clip = nullptr;
  std::optional<double> mos;
  std::string path;
  std::string system_id;
  std::string utterance_id;
};

class Comparator {
 public:
  virtual ~Comparator() = default;

  /// score_cp is the belief that `a` is better than `b`, in [0, 1].
  virtual ComparisonResult Compare(const ClipRef &a, const ClipRef &b) = 0;

  /// Label used in reports.
  virtual std::string name() const = 0;

  /// True when Compare may be called from several threads at once.
  virtual bool reentrant() const { return true; }
};

/// 1 if mos_a > mos_b, 0 if smaller, 0.5 on a tie; MOS values are echoed.
ComparisonResult OracleCompare(double mos_a, double mos_b);

/// Ground-truth comparator; throws DataError when a side has no MOS.
class OracleComparator : public Comparator {
 public:
  ComparisonResult Compare(const ClipRef &a, const ClipRef &b) override;
  std::string name() const override { return "oracle"; }
};

/// log-mel -> fuse -> network forward, inference-mode batch norm.
class ModelComparator : public Comparator {
 public:
  explicit ModelComparator(ModelParams params, const StftConfig &stft = {},
                           std::string label = "model");

  ComparisonResult Compare(const ClipRef &a, const ClipRef &b) override;
  std::string name() const override { return label_; }

  const ModelParams &params() const { return params_; }

 private:
  ModelParams params_;
  LogMelExtractor extractor_;
  std::string label_;
};

/// Averages score(a, b) and 1 - score(b, a).  Costs two calls per
/// comparison; off unless asked for.
class SymmetrizedComparator : public Comparator {
 public:
  explicit SymmetrizedComparator(std::unique_ptr<Comparator> inner);

  ComparisonResult Compare(const ClipRef &a, const ClipRef &b) override;
  std::string name() const override { return inner_->name() + "+sym"; }
  bool reentrant() const override { return inner_->reentrant(); }

 private:
  std::unique_ptr<Comparator> inner_;
};

/// Talks to a child process speaking newline-delimited JSON on its standard
/// input and output:
///
///   -> {"type":"hello","version":1}
///   <- {"type":"ready","name":"..."}
///   -> {"type":"compare","id":N,"a":"x.wav","b":"y.wav"}
///   <- {"type":"result","id":N,"score":0.73,"mos_a":3.1,"mos_b":null}
///   -> {"type":"bye"}
///
/// Lines the endpoint writes that are not JSON objects with a "type" are
/// protocol errors.  A missing reply within the timeout, end of stream or
/// process exit are endpoint errors; their message carries whatever the
/// child wrote to stderr.  One request is in flight at a time, so the
/// comparator is not reentrant.
class ExternComparator : public Comparator {
 public:
  static constexpr std::chrono::milliseconds kDefaultTimeout{30000};

  /// Starts `/bin/sh -c command` and performs the handshake.
  explicit ExternComparator(const std::string &command,
                            std::chrono::milliseconds timeout = kDefaultTimeout);
  ~ExternComparator() override;

  ExternComparator(const ExternComparator &) = delete;
  ExternComparator &operator=(const ExternComparator &) = delete;

  ComparisonResult Compare(const ClipRef &a, const ClipRef &b) override;
  std::string name() const override { return "extern:" + endpoint_name_; }
  bool reentrant() const override { return false; }

  /// Sends bye, closes the pipes and reaps the child.  Idempotent.
  void Shutdown();

  /// Sends one raw line; used by tests to exercise error paths.
  void SendLine(const std::string &line);
  /// Reads one line, honouring the timeout.
  std::string ReadLine();

 private:
  std::string PathFor(const ClipRef &ref, const char *slot);
  [[noreturn]] void FailEndpoint(const std::string &what);
  std::string StderrTail() const;
  void Kill();

  std::string command_;
  std::chrono::milliseconds timeout_;
  std::string endpoint_name_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string read_buffer_;
  long long next_id_ = 1;
  // Scratch directory for the child's stderr and for clips that have no
  // file of their own.
  std::string temp_dir_;
};

/// Builds a comparator from a command-line style spec: "oracle",
/// "model:<checkpoint>" or "extern:<command>".  Throws ConfigError for
/// anything else and IoError when the checkpoint cannot be read.
std::unique_ptr<Comparator> MakeComparator(const std::string &spec,
                                           const StftConfig &stft = {});

}  // namespace pkrank

#endif  // PKRANK_COMPARATORS_H_
