// Copyright 2026 The lccrl Authors
// SPDX-License-Identifier: Apache-2.0
//
// The command-line tool, driven as a subprocess.

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace lccrl;
using namespace lccrl::testing;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run cli(TempDir& dir, const std::string& args) {
  const std::string out = dir.file("stdout.txt"), err = dir.file("stderr.txt");
  const std::string cmd = std::string(LCCRL_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

const char* kTiny = "--word-dim 6 --speaker-dim 3 --hidden 5 --context-hidden 5 --decoder-hidden 5";

}  // namespace

TEST_CASE("help exits zero", "[cli]") {
  TempDir dir("cli-help");
  auto r = cli(dir, "--help");
  CHECK(r.code == 0);
  CHECK(r.out.find("gradcheck") != std::string::npos);
}

TEST_CASE("pre-training batches five conversations by default", "[cli]") {
  TempDir dir("cli-batch");
  auto r = cli(dir, "pretrain --help");
  REQUIRE(r.code == 0);
  const auto at = r.out.find("--batch");
  REQUIRE(at != std::string::npos);
  const std::string line = r.out.substr(at, r.out.find('\n', at) - at);
  CHECK(line.find("[5]") != std::string::npos);
}

TEST_CASE("an unknown flag prints usage and exits one", "[cli]") {
  TempDir dir("cli-flag");
  auto r = cli(dir, "gen-synth --out " + dir.file("x.jsonl") + " --bogus 1");
  CHECK(r.code == 1);
  CHECK(r.err.find("--bogus") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(cli(dir, "").code == 1);
}

TEST_CASE("validation errors exit one", "[cli]") {
  TempDir dir("cli-invalid");
  std::ofstream(dir.file("bad.jsonl")) << R"({"utterances":[{"speaker":"A","text":"x"}],"labels":["C1","C2"]})" << '\n';
  auto r = cli(dir, "finetune --data " + dir.file("bad.jsonl") + " --out " + dir.file("m.bin"));
  CHECK(r.code == 1);
  CHECK(r.err.find("bad.jsonl:1:") != std::string::npos);
  CHECK(cli(dir, "gen-synth --spec nope --out " + dir.file("x.jsonl")).code == 1);
  CHECK(cli(dir, "gradcheck --model nope").code == 1);
}

TEST_CASE("a corrupt checkpoint is a validation error", "[cli]") {
  TempDir dir("cli-corrupt");
  std::ofstream(dir.file("junk.bin")) << "not a checkpoint";
  REQUIRE(cli(dir, "gen-synth --num 1 --out " + dir.file("d.jsonl")).code == 0);
  auto r = cli(dir, "label --model " + dir.file("junk.bin") + " --data " + dir.file("d.jsonl"));
  CHECK(r.code == 1);
  CHECK(r.err.find("bad magic") != std::string::npos);
}

TEST_CASE("runtime failures exit two", "[cli]") {
  TempDir dir("cli-runtime");
  auto r = cli(dir, "gen-synth --num 1 --out " + dir.file("missing/d.jsonl"));
  CHECK(r.code == 2);
  CHECK(r.err.find("cannot write") != std::string::npos);
}

TEST_CASE("gradcheck prints the error and passes", "[cli]") {
  TempDir dir("cli-gradcheck");
  for (const std::string model : {"lccrl", "labeler"}) {
    auto r = cli(dir, "gradcheck --model " + model + " --seed 0");
    CHECK(r.code == 0);
    CHECK(r.out.rfind("max relative error ", 0) == 0);
    CHECK(std::stod(r.out.substr(19)) <= 1e-4);
  }
}

TEST_CASE("gen-synth is deterministic under --seed", "[cli]") {
  TempDir dir("cli-gen");
  REQUIRE(cli(dir, "gen-synth --num 3 --seed 4 --out " + dir.file("a.jsonl")).code == 0);
  REQUIRE(cli(dir, "gen-synth --num 3 --seed 4 --out " + dir.file("b.jsonl")).code == 0);
  REQUIRE(cli(dir, "gen-synth --num 3 --seed 4 --unlabeled --spec speaker-cue --out " + dir.file("c.jsonl")).code == 0);
  CHECK(slurp(dir.file("a.jsonl")) == slurp(dir.file("b.jsonl")));
  const Corpus c = parse_jsonl(dir.file("c.jsonl"));
  REQUIRE(c.size() == 3);
  CHECK_FALSE(c[0].labeled());
}

TEST_CASE("pretrain, finetune, label and eval wire together", "[cli]") {
  TempDir dir("cli-pipeline");
  REQUIRE(cli(dir, "gen-synth --num 6 --seed 1 --unlabeled --out " + dir.file("u.jsonl")).code == 0);
  REQUIRE(cli(dir, "gen-synth --num 3 --seed 2 --out " + dir.file("l.jsonl")).code == 0);
  REQUIRE(cli(dir, "gen-synth --num 2 --seed 3 --out " + dir.file("t.jsonl")).code == 0);

  auto pre = cli(dir, "pretrain " + std::string(kTiny) + " --data " + dir.file("u.jsonl") + " --vocab-data " +
                          dir.file("l.jsonl") + " --epochs 2 --batch 5 --out " + dir.file("ck.bin") + " --curve " +
                          dir.file("pre.csv"));
  REQUIRE(pre.code == 0);
  CHECK(slurp(dir.file("pre.csv")).rfind("epoch,train_nll,heldout_nll\n", 0) == 0);
  CHECK(Checkpoint::load(dir.file("ck.bin")).metadata.at("model") == "lccrl");

  auto fin = cli(dir, "finetune --init " + dir.file("ck.bin") + " --data " + dir.file("l.jsonl") +
                          " --epochs 2 --out " + dir.file("m.bin") + " --transfer-report " + dir.file("report.json"));
  REQUIRE(fin.code == 0);
  const auto report = nlohmann::json::parse(slurp(dir.file("report.json")));
  CHECK(report.at("checkpoint_shared_hash") == report.at("step0_shared_hash"));
  CHECK(report.at("missing").size() == 3);

  auto lab = cli(dir, "label --model " + dir.file("m.bin") + " --data " + dir.file("t.jsonl") + " --out " +
                          dir.file("pred.jsonl"));
  REQUIRE(lab.code == 0);
  std::ifstream in(dir.file("pred.jsonl"));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    CHECK(j.at("predicted").size() == j.at("utterances").size());
    ++n;
  }
  CHECK(n == 2);

  auto a = cli(dir, "eval --predicted " + dir.file("pred.jsonl") + " --csv " + dir.file("a.csv"));
  auto b = cli(dir, "eval --model " + dir.file("m.bin") + " --data " + dir.file("t.jsonl") + " --csv " +
                        dir.file("b.csv") + " --json " + dir.file("b.json"));
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);
  CHECK(slurp(dir.file("a.csv")) == slurp(dir.file("b.csv")));
  CHECK(nlohmann::json::parse(slurp(dir.file("b.json"))).at("labels").size() == 5);
}

TEST_CASE("fine-tuning refuses a checkpoint built on another vocabulary", "[cli]") {
  TempDir dir("cli-vocab");
  REQUIRE(cli(dir, "gen-synth --num 2 --seed 1 --unlabeled --out " + dir.file("u.jsonl")).code == 0);
  REQUIRE(cli(dir, "gen-synth --num 2 --seed 9 --spec speaker-cue --out " + dir.file("l.jsonl")).code == 0);
  REQUIRE(cli(dir, "pretrain " + std::string(kTiny) + " --data " + dir.file("u.jsonl") + " --epochs 1 --out " +
                   dir.file("ck.bin")).code == 0);
  const std::string base =
      "finetune --init " + dir.file("ck.bin") + " --data " + dir.file("l.jsonl") + " --rebuild-vocab --epochs 1 --out " +
      dir.file("m.bin");
  auto refused = cli(dir, base);
  CHECK(refused.code == 1);
  CHECK(refused.err.find("vocabulary") != std::string::npos);
  CHECK(cli(dir, base + " --allow-vocab-mismatch").code == 0);
}

TEST_CASE("sweep writes one row per fraction and seed", "[cli]") {
  TempDir dir("cli-sweep");
  REQUIRE(cli(dir, "gen-synth --num 3 --seed 1 --unlabeled --out " + dir.file("u.jsonl")).code == 0);
  REQUIRE(cli(dir, "gen-synth --num 4 --seed 2 --out " + dir.file("l.jsonl")).code == 0);
  REQUIRE(cli(dir, "gen-synth --num 2 --seed 3 --out " + dir.file("t.jsonl")).code == 0);
  REQUIRE(cli(dir, "pretrain " + std::string(kTiny) + " --data " + dir.file("u.jsonl") + " --vocab-data " +
                   dir.file("l.jsonl") + " --epochs 1 --out " + dir.file("ck.bin")).code == 0);
  auto r = cli(dir, "sweep --pretrained " + dir.file("ck.bin") + " --data " + dir.file("l.jsonl") + " --test " +
                        dir.file("t.jsonl") + " --fractions 0.5,1 --seeds 2 --epochs 1 --out " + dir.file("s.csv"));
  REQUIRE(r.code == 0);
  std::istringstream csv(slurp(dir.file("s.csv")));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 5);
  CHECK(r.out.find("fraction 0.50") != std::string::npos);
}
