// pkrank/tests/test_cli.cc

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

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "test_util.h"

namespace fs = std::filesystem;

namespace {

std::string ReadAll(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

std::vector<std::string> Lines(const std::string &path) {
  std::istringstream is(ReadAll(path));
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

// Runs the tool inside `dir`; returns its exit status.
int Run(const testing::TempDir &dir, const std::string &args, const std::string &env = "") {
  const std::string cmd = "cd '" + dir.path() + "' && " + env + " '" + PKRANK_CLI_PATH + "' " +
                          args + " >stdout.txt 2>stderr.txt";
  const int rc = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

nlohmann::json ReadJson(const std::string &path) { return nlohmann::json::parse(ReadAll(path)); }

}  // namespace

TEST_CASE("synth writes the corpus deterministically") {
  testing::TempDir dir;
  REQUIRE(Run(dir, "synth --k 5 --m 20 --seed 7 --out a") == 0);
  REQUIRE(Run(dir, "synth --k 5 --m 20 --seed 7 --out b") == 0);
  int systems = 0;
  for (const auto &e : fs::directory_iterator(dir / "a")) {
    const std::string name = e.path().filename().string();
    if (!e.is_directory() || name == "noisy") continue;
    ++systems;
    int wavs = 0;
    for (const auto &f : fs::directory_iterator(e.path())) wavs += f.path().extension() == ".wav";
    CHECK(wavs == 20);
  }
  CHECK(systems == 5);
  const auto rows = Lines(dir / "a/mos.csv");
  CHECK(rows.size() == 101);
  CHECK(rows[0] == "system_id,utterance_id,mos");
  CHECK(ReadAll(dir / "a/mos.csv") == ReadAll(dir / "b/mos.csv"));
  CHECK(ReadAll(dir / "a/sys03/utt0011.wav") == ReadAll(dir / "b/sys03/utt0011.wav"));

  CHECK(Run(dir, "synth --k 5 --m 20 --grades 30,20 --out c") == 2);
  CHECK(ReadAll(dir / "stderr.txt").find("grades") != std::string::npos);
  CHECK(Run(dir, "synth --m 20 --out c") == 2);
  CHECK(Run(dir, "") == 2);
  CHECK(Run(dir, "--help") == 0);
}

TEST_CASE("rank with the oracle") {
  testing::TempDir dir;
  REQUIRE(Run(dir, "synth --k 5 --m 6 --seed 3 --out set") == 0);
  REQUIRE(Run(dir, "rank --data set --comparator oracle --strategy bs --out bs") == 0);
  REQUIRE(Run(dir, "rank --data set --comparator oracle --strategy nbs --out nbs --jobs 3") == 0);
  const auto bs = ReadJson(dir / "bs/ranking.json");
  const auto nbs = ReadJson(dir / "nbs/ranking.json");
  CHECK(bs["correlation"]["srcc"].get<double>() == 1.0);
  CHECK(bs["correlation"]["krcc"].get<double>() == 1.0);
  CHECK(bs["order"] == nbs["order"]);
  CHECK(bs["comparisons"].get<int>() == 60);
  CHECK(Lines(dir / "bs/ranking.csv").size() == 6);

  REQUIRE(Run(dir, "rank --data set --comparator oracle --include-noisy --out noisy") == 0);
  const auto with_noisy = ReadJson(dir / "noisy/ranking.json");
  CHECK(with_noisy["num_systems"].get<int>() == bs["num_systems"].get<int>() + 1);

  CHECK(Run(dir, "rank --data set --comparator model:missing.ckpt --out x") == 2);
  CHECK(Run(dir, "rank --data nowhere --comparator oracle --out x") == 2);
  CHECK(Run(dir, "rank --data set --comparator oracle --strategy fancy --out x") == 2);
}

TEST_CASE("rank through an external endpoint") {
  testing::TempDir dir;
  REQUIRE(Run(dir, "synth --k 4 --m 3 --seed 5 --out set") == 0);
  const std::string endpoint = "python3 " + testing::SourceDir() +
                               "/tests/fixtures/fake_endpoint.py --mode mos --mos-csv set/mos.csv";
  REQUIRE(Run(dir, "rank --data set --comparator 'extern:" + endpoint + "' --out ext") == 0);
  REQUIRE(Run(dir, "rank --data set --comparator oracle --out ora") == 0);
  CHECK(ReadAll(dir / "ext/ranking.csv") == ReadAll(dir / "ora/ranking.csv"));
  const std::string failing =
      "python3 " + testing::SourceDir() + "/tests/fixtures/fake_endpoint.py --mode exit";
  CHECK(Run(dir, "rank --data set --comparator 'extern:" + failing + "' --out bad") == 2);
}

TEST_CASE("pairs, train, rank and eval-sqa") {
  testing::TempDir dir;
  REQUIRE(Run(dir, "synth --k 4 --m 10 --seed 9 --out set") == 0);
  REQUIRE(Run(dir, "pairs --data set --delta 0.3 --out all.csv") == 0);
  CHECK(Lines(dir / "all.csv")[0] == "utterance_id,system_a,system_b,mos_a,mos_b,target");
  REQUIRE(Run(dir, "pairs --data set --val-utts 3 --out tr.csv --val-out va.csv") == 0);
  CHECK(Lines(dir / "tr.csv").size() + Lines(dir / "va.csv").size() ==
        Lines(dir / "all.csv").size() + 1);

  // Config values sit below flags: the file asks for 2 epochs, the flag for 3.
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"epochs": 2, "lr": 0.001, "val_utts": 3, "keep": 2})";
  }
  REQUIRE(Run(dir, "train --data set --out run --config cfg.json --epochs 3 --seed 1") == 0);
  const auto log = Lines(dir / "run/train_log.csv");
  CHECK(log.size() == 4);
  CHECK(log[0] == "epoch,train_loss,val_loss,val_lcc,val_srcc,val_krcc,val_sum");
  int kept = 0;
  for (const auto &e : fs::directory_iterator(dir / "run/checkpoints"))
    kept += e.path().extension() == ".ckpt";
  CHECK(kept == 2);
  CHECK(fs::exists(dir / "run/best.ckpt"));
  const auto summary = ReadJson(dir / "run/train_summary.json");
  CHECK(summary["epochs"].get<int>() == 3);
  CHECK(summary["checkpoints"].size() == 2);

  // PKRANK_SEED stands in for --seed.
  REQUIRE(Run(dir, "train --data set --out env --config cfg.json --epochs 3", "PKRANK_SEED=1") ==
          0);
  CHECK(ReadAll(dir / "env/best.ckpt") == ReadAll(dir / "run/best.ckpt"));
  CHECK(ReadAll(dir / "env/train_log.csv") == ReadAll(dir / "run/train_log.csv"));

  REQUIRE(Run(dir, "rank --data set --comparator model:run/best.ckpt --out mr --jobs 2") == 0);
  CHECK(ReadJson(dir / "mr/ranking.json")["comparator"] == "model:best.ckpt");
  REQUIRE(Run(dir, "eval-sqa --data set --checkpoint run/best.ckpt --strategy noisy --out q") ==
          0);
  CHECK(Lines(dir / "q/sqa.csv").size() == 41);
  CHECK(ReadJson(dir / "q/sqa.json")["system_means"].size() == 4);

  CHECK(Run(dir, "train --data set --out bad --val-utts 10") == 2);
  CHECK(Run(dir, "train --data set --out bad --val-utts 3 --delta 9") == 2);
  {
    std::ofstream cfg(dir / "typo.json");
    cfg << R"({"epoch": 2})";
  }
  CHECK(Run(dir, "train --data set --out bad --config typo.json") == 2);
  CHECK(Run(dir, "train --data set --out bad --val-utts 3 --epochs 1 --optimizer sgd --lr 1e30") ==
        3);
}

TEST_CASE("sweep-delta table") {
  testing::TempDir dir;
  REQUIRE(Run(dir, "synth --k 4 --m 8 --seed 2 --mos-noise 0.4 --out set") == 0);
  REQUIRE(Run(dir,
              "sweep-delta --data set --out sw --deltas 0,0.3,0.7,3 --epochs 1 --lr 0.001 "
              "--val-utts 3") == 0);
  const auto rows = Lines(dir / "sw/sweep.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "delta,train_pairs,lcc,srcc,krcc,sum");
  long long prev = -1;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto first = rows[i].find(','), second = rows[i].find(',', first + 1);
    const long long count = std::stoll(rows[i].substr(first + 1, second - first - 1));
    if (prev >= 0) CHECK(count <= prev);
    prev = count;
  }
}
