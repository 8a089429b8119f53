// pkrank/comparators.cc

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

#include "pkrank/comparators.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace pkrank {

namespace fs = std::filesystem;
using nlohmann::json;

ComparisonResult OracleCompare(double mos_a, double mos_b) {
  ComparisonResult r;
  r.score_cp = mos_a > mos_b ? 1.0 : (mos_a < mos_b ? 0.0 : 0.5);
  r.mos_pre_1 = mos_a;
  r.mos_pre_2 = mos_b;
  return r;
}

ComparisonResult OracleComparator::Compare(const ClipRef &a, const ClipRef &b) {
  for (const ClipRef *r : {&a, &b})
    if (!r->mos)
      throw DataError("oracle comparator needs a MOS label for " + r->system_id + "/" +
                      r->utterance_id);
  return OracleCompare(*a.mos, *b.mos);
}

ModelComparator::ModelComparator(ModelParams params, const StftConfig &stft, std::string label)
    : params_(std::move(params)),
      extractor_(stft, params_.config.n_mels, kCanonicalRateHz),
      label_(std::move(label)) {
  params_.config.Check();
}

ComparisonResult ModelComparator::Compare(const ClipRef &a, const ClipRef &b) {
  for (const ClipRef *r : {&a, &b})
    if (r->clip == nullptr || r->clip->empty())
      throw DataError("no audio for " + r->system_id + "/" + r->utterance_id);
  const MelSpec xa = extractor_.Compute(*a.clip);
  const MelSpec xb = extractor_.Compute(*b.clip);
  return Forward(params_, Fuse(xa, xb, static_cast<float>(extractor_.SilenceFloor())));
}

SymmetrizedComparator::SymmetrizedComparator(std::unique_ptr<Comparator> inner)
    : inner_(std::move(inner)) {
  if (!inner_) throw ConfigError("symmetrized comparator needs an inner comparator");
}

ComparisonResult SymmetrizedComparator::Compare(const ClipRef &a, const ClipRef &b) {
  const ComparisonResult ab = inner_->Compare(a, b);
  const ComparisonResult ba = inner_->Compare(b, a);
  ComparisonResult r;
  r.score_cp = 0.5 * (ab.score_cp + (1.0 - ba.score_cp));
  r.mos_pre_1 = 0.5 * (ab.mos_pre_1 + ba.mos_pre_2);
  r.mos_pre_2 = 0.5 * (ab.mos_pre_2 + ba.mos_pre_1);
  return r;
}

// ---------------------------------------------------------------------------
// ExternComparator

namespace {

// A dead endpoint must surface as an error return from write(), not as a
// signal that takes the whole process down.
void IgnoreSigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

std::string MakeTempDir() {
  const char *base = std::getenv("TMPDIR");
  std::string tmpl = std::string(base && *base ? base : "/tmp") + "/pkrank-ext-XXXXXX";
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  if (::mkdtemp(buf.data()) == nullptr)
    throw IoError("cannot create temporary directory: " + std::string(std::strerror(errno)));
  return std::string(buf.data());
}

void CloseFd(int &fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

double ReadOptionalMos(const json &msg, const char *key) {
  auto it = msg.find(key);
  if (it == msg.end() || it->is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!it->is_number()) throw ProtocolError(std::string("result field ") + key + " is not a number");
  return it->get<double>();
}

}  // namespace

ExternComparator::ExternComparator(const std::string &command,
                                   std::chrono::milliseconds timeout)
    : command_(command), timeout_(timeout) {
  if (command.empty()) throw ConfigError("empty endpoint command");
  if (timeout.count() <= 0) throw ConfigError("endpoint timeout must be positive");
  IgnoreSigpipe();
  temp_dir_ = MakeTempDir();

  int in_pipe[2], out_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw IoError("pipe: " + std::string(std::strerror(errno)));
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw IoError("pipe: " + std::string(std::strerror(errno)));
  }
  const std::string err_path = temp_dir_ + "/stderr.txt";
  int err_fd = ::open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (err_fd < 0) throw IoError("cannot create " + err_path);

  pid_ = ::fork();
  if (pid_ < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_fd}) ::close(fd);
    throw IoError("fork: " + std::string(std::strerror(errno)));
  }
  if (pid_ == 0) {
    ::dup2(in_pipe[0], 0);
    ::dup2(out_pipe[1], 1);
    ::dup2(err_fd, 2);
    ::signal(SIGPIPE, SIG_DFL);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char *>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(err_fd);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];

  try {
    SendLine(json{{"type", "hello"}, {"version", 1}}.dump());
    const std::string line = ReadLine();
    json msg = json::parse(line, nullptr, false);
    if (msg.is_discarded() || !msg.is_object() || msg.value("type", "") != "ready")
      throw ProtocolError("endpoint did not answer hello with ready: " + line);
    auto name = msg.find("name");
    endpoint_name_ = (name != msg.end() && name->is_string()) ? name->get<std::string>()
                                                              : std::string("endpoint");
  } catch (...) {
    Kill();
    fs::remove_all(temp_dir_);
    throw;
  }
}

ExternComparator::~ExternComparator() {
  try {
    Shutdown();
  } catch (...) {
  }
}

void ExternComparator::Kill() {
  CloseFd(to_child_);
  CloseFd(from_child_);
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }
}

void ExternComparator::Shutdown() {
  if (pid_ > 0) {
    if (to_child_ >= 0) {
      const std::string bye = json{{"type", "bye"}}.dump() + "\n";
      [[maybe_unused]] ssize_t n = ::write(to_child_, bye.data(), bye.size());
    }
    CloseFd(to_child_);
    // Give the endpoint a moment to exit on its own.
    for (int i = 0; i < 200 && pid_ > 0; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
        pid_ = -1;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    Kill();
  }
  CloseFd(from_child_);
  if (!temp_dir_.empty()) {
    std::error_code ec;
    fs::remove_all(temp_dir_, ec);
    temp_dir_.clear();
  }
}

std::string ExternComparator::StderrTail() const {
  if (temp_dir_.empty()) return {};
  std::ifstream is(temp_dir_ + "/stderr.txt");
  std::stringstream ss;
  ss << is.rdbuf();
  std::string text = ss.str();
  constexpr size_t kMax = 2000;
  if (text.size() > kMax) text = "..." + text.substr(text.size() - kMax);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

void ExternComparator::FailEndpoint(const std::string &what) {
  std::string msg = "endpoint '" + command_ + "': " + what;
  if (pid_ > 0) {
    int status = 0;
    // The child may be a moment away from exiting; wait briefly so the exit
    // status and its last words make it into the message.
    pid_t r = 0;
    for (int i = 0; i < 20 && (r = ::waitpid(pid_, &status, WNOHANG)) == 0; ++i)
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    if (r == pid_) {
      pid_ = -1;
      if (WIFEXITED(status))
        msg += "; exit status " + std::to_string(WEXITSTATUS(status));
      else if (WIFSIGNALED(status))
        msg += "; killed by signal " + std::to_string(WTERMSIG(status));
    }
  }
  const std::string err = StderrTail();
  if (!err.empty()) msg += "; stderr: " + err;
  Kill();
  throw EndpointError(msg);
}

void ExternComparator::SendLine(const std::string &line) {
  if (to_child_ < 0) throw EndpointError("endpoint '" + command_ + "' is not running");
  std::string data = line;
  data.push_back('\n');
  size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::write(to_child_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      FailEndpoint("write failed: " + std::string(std::strerror(errno)));
    }
    done += static_cast<size_t>(n);
  }
}

std::string ExternComparator::ReadLine() {
  if (from_child_ < 0) throw EndpointError("endpoint '" + command_ + "' is not running");
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const size_t nl = read_buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = read_buffer_.substr(0, nl);
      read_buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0)
      FailEndpoint("no reply within " + std::to_string(timeout_.count()) + " ms");
    pollfd pfd{from_child_, POLLIN, 0};
    const int pr = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (pr < 0) {
      if (errno == EINTR) continue;
      FailEndpoint("poll failed: " + std::string(std::strerror(errno)));
    }
    if (pr == 0) continue;  // deadline check above reports it
    char buf[4096];
    const ssize_t n = ::read(from_child_, buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      FailEndpoint("read failed: " + std::string(std::strerror(errno)));
    }
    if (n == 0) FailEndpoint("endpoint closed its output");
    read_buffer_.append(buf, static_cast<size_t>(n));
  }
}

std::string ExternComparator::PathFor(const ClipRef &ref, const char *slot) {
  if (!ref.path.empty()) return ref.path;
  if (ref.clip == nullptr || ref.clip->empty())
    throw DataError("no audio for " + ref.system_id + "/" + ref.utterance_id);
  // The endpoint finishes reading before it replies, so the two scratch
  // files can be reused for every request.
  const std::string path = temp_dir_ + "/" + slot + ".wav";
  WriteWav(*ref.clip, path);
  return path;
}

ComparisonResult ExternComparator::Compare(const ClipRef &a, const ClipRef &b) {
  if (pid_ <= 0) throw EndpointError("endpoint '" + command_ + "' is not running");
  const long long id = next_id_++;
  json req = {{"type", "compare"}, {"id", id}, {"a", PathFor(a, "a")}, {"b", PathFor(b, "b")}};
  SendLine(req.dump());
  const std::string line = ReadLine();

  json msg = json::parse(line, nullptr, false);
  if (msg.is_discarded() || !msg.is_object())
    throw ProtocolError("endpoint sent a line that is not a JSON object: " + line);
  const std::string type = msg.value("type", "");
  if (type == "error")
    throw ProtocolError("endpoint reported an error: " + msg.value("message", line));
  if (type != "result") throw ProtocolError("expected a result message, got: " + line);
  auto rid = msg.find("id");
  if (rid == msg.end() || !rid->is_number_integer() || rid->get<long long>() != id)
    throw ProtocolError("result id does not match request id " + std::to_string(id));
  auto score = msg.find("score");
  if (score == msg.end() || !score->is_number())
    throw ProtocolError("result has no numeric score");
  const double s = score->get<double>();
  if (!std::isfinite(s) || s < 0.0 || s > 1.0)
    throw ProtocolError("score " + score->dump() + " outside [0, 1]");

  ComparisonResult r;
  r.score_cp = s;
  r.mos_pre_1 = ReadOptionalMos(msg, "mos_a");
  r.mos_pre_2 = ReadOptionalMos(msg, "mos_b");
  return r;
}

std::unique_ptr<Comparator> MakeComparator(const std::string &spec, const StftConfig &stft) {
  if (spec == "oracle") return std::make_unique<OracleComparator>();
  if (spec.rfind("model:", 0) == 0) {
    const std::string path = spec.substr(6);
    if (path.empty()) throw ConfigError("model comparator needs a checkpoint path");
    if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
    return std::make_unique<ModelComparator>(LoadCheckpoint(path), stft,
                                             "model:" + fs::path(path).filename().string());
  }
  if (spec.rfind("extern:", 0) == 0) {
    const std::string cmd = spec.substr(7);
    if (cmd.empty()) throw ConfigError("extern comparator needs a command");
    return std::make_unique<ExternComparator>(cmd);
  }
  throw ConfigError("unknown comparator '" + spec +
                    "' (expected oracle, model:<checkpoint> or extern:<command>)");
}

}  // namespace pkrank
