// Copyright 2026 The pQRNN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Drives the pqrnn binary end to end on a small synthetic dataset.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "pqrnn/commands.h"
#include "pqrnn/errors.h"
#include "pqrnn/run_config.h"

using namespace pqrnn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWorkDir =
    fs::temp_directory_path() / ("pqrnn_cli_test_" + std::to_string(::getpid()));

const fs::path& work_dir() {
  static const bool created = [] {
    fs::remove_all(kWorkDir);
    return fs::create_directories(kWorkDir);
  }();
  (void)created;
  return kWorkDir;
}

struct Cleanup {
  ~Cleanup() { fs::remove_all(kWorkDir); }
} cleanup;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs the CLI with `args` (shell syntax) and optional stdin text.
Result run(const std::string& args, const std::string& input = "") {
  const auto in = work_dir() / "stdin.txt";
  const auto out = work_dir() / "stdout.txt";
  const auto err = work_dir() / "stderr.txt";
  std::ofstream(in, std::ios::binary) << input;
  const std::string cmd = std::string("cd ") + work_dir().string() + " && " +
                          PQRNN_CLI_PATH + " " + args + " < " + in.string() + " > " +
                          out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Small model and data paths relative to the work directory.
json small_config(const std::string& out_dir, int steps = 60) {
  auto j = json::parse(R"({
    "projection": {"feature_dim": 64},
    "encoder": {"bottleneck_dim": 16, "state_size": 8, "num_layers": 1,
                "projection_dropout": 0.1, "zoneout_base": 0.1},
    "train": {"batch_size": 16, "eval_every": 30, "base_lr": 0.01},
    "data": {"train": "syn/train.tsv", "dev": "syn/dev.tsv", "test": "syn/test.tsv",
             "schema": "syn/schema.json"}
  })");
  j["out_dir"] = out_dir;
  j["train"]["steps"] = steps;
  return j;
}

std::string write_config(const std::string& name, const json& j) {
  std::ofstream(work_dir() / name) << j.dump(2);
  return name;
}

void ensure_synthetic() {
  static bool done = false;
  if (done) return;
  const auto r = run("synth --intents 3 --slot-types 3 --vocab-size 80 --train 60 --dev 40 "
                     "--test 40 --augmented 120 --out-dir syn");
  REQUIRE(r.code == 0);
  done = true;
}

}  // namespace

TEST_CASE("synth writes the dataset files") {
  ensure_synthetic();
  for (const char* f : {"train.tsv", "dev.tsv", "test.tsv", "augmented.tsv", "schema.json"}) {
    CHECK(fs::exists(work_dir() / "syn" / f));
  }
  CHECK(lines(slurp(work_dir() / "syn" / "train.tsv")).size() == 60);
  const auto schema = json::parse(slurp(work_dir() / "syn" / "schema.json"));
  CHECK(schema["intents"].size() == 3);
  CHECK(schema["slot_types"].size() == 3);
}

TEST_CASE("train, eval, predict, export and distill") {
  ensure_synthetic();
  const auto cfg = write_config("train.json", small_config("run"));
  const auto start = std::chrono::steady_clock::now();
  const auto train = run("train --config " + cfg);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  REQUIRE_MESSAGE(train.code == 0, train.err);
  CHECK(seconds < 30);
  for (const char* f : {"config.json", "schema.json", "metrics.jsonl", "model.ckpt",
                        "test_metrics.json"}) {
    CHECK(fs::exists(work_dir() / "run" / f));
  }
  const auto log = lines(slurp(work_dir() / "run" / "metrics.jsonl"));
  CHECK(log.size() == 2);
  CHECK(json::parse(log.back())["step"] == 60);
  // The saved config reloads to the same run.
  CHECK(load_run_config((work_dir() / "run" / "config.json").string()).train.steps == 60);

  const auto eval = run("eval --checkpoint run/model.ckpt --data syn/test.tsv");
  REQUIRE_MESSAGE(eval.code == 0, eval.err);
  const auto metrics = json::parse(eval.out);
  for (const char* key : {"intent_accuracy", "slot_f1", "exact_match"}) {
    CHECK(metrics.contains(key));
  }
  const auto test_metrics = json::parse(slurp(work_dir() / "run" / "test_metrics.json"));
  CHECK(test_metrics["exact_match"] == metrics["exact_match"]);

  const auto predict = run("predict --checkpoint run/model.ckpt --bench",
                           "q7\tbook a flight\n\nsecond query here\n");
  REQUIRE_MESSAGE(predict.code == 0, predict.err);
  const auto parses = lines(predict.out);
  REQUIRE(parses.size() == 2);
  const auto first = json::parse(parses[0]);
  CHECK(first["id"] == "q7");
  CHECK(first["slots"].size() == 3);
  CHECK(first["slots"][0]["token"] == "book");
  CHECK(first["intent_prob"].get<double>() > 0);
  CHECK(json::parse(parses[1])["id"] == "line-3");
  // Keys keep their documented order.
  CHECK(parses[0].rfind("{\"id\":", 0) == 0);
  CHECK(predict.err.find("empty") != std::string::npos);
  CHECK(predict.err.find("queries/sec") != std::string::npos);

  for (const char* split : {"train", "augmented", "dev"}) {
    const auto r = run(std::string("export-logits --checkpoint run/model.ckpt --data syn/") +
                       split + ".tsv --output " + split + ".jsonl");
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  const auto teacher = lines(slurp(work_dir() / "train.jsonl"));
  CHECK(teacher.size() == 60);

  auto distill_cfg = small_config("distilled");
  distill_cfg["data"]["teacher_logits"] = "train.jsonl";
  distill_cfg["data"]["dev_teacher_logits"] = "dev.jsonl";
  distill_cfg["data"]["augmented"] = "syn/augmented.tsv";
  const auto dcfg = write_config("distill.json", distill_cfg);
  // The augmented queries have no teacher records in train.jsonl.
  const auto missing = run("distill --config " + dcfg + " --augment-ratio 1");
  CHECK(missing.code == 4);
  std::ofstream all(work_dir() / "all.jsonl");
  all << slurp(work_dir() / "train.jsonl") << slurp(work_dir() / "augmented.jsonl");
  all.close();
  const auto distill =
      run("distill --config " + dcfg + " --augment-ratio 1 --teacher-logits all.jsonl");
  REQUIRE_MESSAGE(distill.code == 0, distill.err);
  const auto dlog = lines(slurp(work_dir() / "distilled" / "metrics.jsonl"));
  REQUIRE(!dlog.empty());
  CHECK(json::parse(dlog.back()).contains("dev_soft_loss"));
}

TEST_CASE("flags override the config file") {
  ensure_synthetic();
  const auto cfg = write_config("flags.json", small_config("unused", 500));
  const auto r = run("train --config " + cfg + " --steps 5 --batch-size 4 --out-dir flagged --seed 7");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto saved = json::parse(slurp(work_dir() / "flagged" / "config.json"));
  CHECK(saved["train"]["steps"] == 5);
  CHECK(saved["train"]["batch_size"] == 4);
  CHECK(saved["train"]["seed"] == "0x0000000000000007");
  CHECK(lines(slurp(work_dir() / "flagged" / "metrics.jsonl")).size() == 1);
}

TEST_CASE("exit codes") {
  ensure_synthetic();
  auto unknown = small_config("x");
  unknown["train"]["learning_rate"] = 0.1;
  CHECK(run("train --config " + write_config("unknown.json", unknown)).code == 2);
  CHECK(run("train --config " + write_config("ratio.json", small_config("x")) +
            " --augment-ratio 3").code == 2);
  CHECK(run("train --no-such-flag").code == 2);
  CHECK(run("").code == 2);
  CHECK(run("train --config missing.json").code == 2);

  auto no_dev = small_config("x");
  no_dev["data"]["dev"] = "syn/nope.tsv";
  const auto r = run("train --config " + write_config("nodev.json", no_dev));
  CHECK(r.code == 3);
  CHECK(r.err.find("nope.tsv") != std::string::npos);
  std::ofstream(work_dir() / "bad.tsv") << "q1\tshow flights\tflight\n";
  CHECK(run("eval --checkpoint run/model.ckpt --data bad.tsv").code == 3);

  ensure_synthetic();
  if (!fs::exists(work_dir() / "run" / "model.ckpt")) {
    REQUIRE(run("train --config " + write_config("train.json", small_config("run"))).code == 0);
  }
  const auto bytes = slurp(work_dir() / "run" / "model.ckpt");
  std::ofstream(work_dir() / "truncated.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK(run("eval --checkpoint truncated.ckpt --data syn/test.tsv").code == 5);
  CHECK(run("predict --checkpoint nothing.ckpt", "hello\n").code == 5);

  auto distill_cfg = small_config("x");
  distill_cfg["data"]["teacher_logits"] = "empty.jsonl";
  std::ofstream(work_dir() / "empty.jsonl") << "";
  CHECK(run("distill --config " + write_config("d.json", distill_cfg)).code == 4);
}

TEST_CASE("ablation grid writes one row per variant") {
  ensure_synthetic();
  const auto cfg = write_config("ablate.json", small_config("ablation", 10));
  const auto r = run("ablate --config " + cfg);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(slurp(work_dir() / "ablation" / "ablation.tsv"));
  REQUIRE(rows.size() == 9);
  CHECK(rows[0] == "variant\tchanged\tintent_accuracy\tslot_f1\texact_match");
  const std::vector<std::string> names = {"default", "no_quantization", "no_batch_norm",
                                          "unbalanced_map", "zoneout_0", "half_state",
                                          "half_bottleneck", "half_features"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    CHECK(rows[i + 1].rfind(names[i] + "\t", 0) == 0);
  }
  const auto j = json::parse(slurp(work_dir() / "ablation" / "ablation.json"));
  REQUIRE(j.size() == 8);
  CHECK(j[0]["changed"] == "-");
  CHECK(j[1]["changed"] == "encoder.quantize");
  CHECK(j[5]["changed"] == "encoder.state_size");
  CHECK(j[7]["changed"] == "projection.feature_dim");
}

TEST_CASE("run config JSON") {
  RunConfig c;
  c.train.seed = 0xABCDEF;
  c.projection.map_mode = MapMode::kUnbalanced;
  c.data.augment_ratio = 4;
  RunConfig back;
  update_from_json(back, json::parse(to_json(c).dump()));
  CHECK(back == c);
  const auto text = to_json(c).dump();
  CHECK(text.find("\"0x0000000000ABCDEF\"") != std::string::npos);

  RunConfig partial;
  update_from_json(partial, json::parse(R"({"encoder": {"state_size": 32}, "train": {"seed": 9}})"));
  CHECK(partial.encoder.state_size == 32);
  CHECK(partial.encoder.bottleneck_dim == RunConfig{}.encoder.bottleneck_dim);
  CHECK(partial.train.seed == 9);

  try {
    update_from_json(partial, json::parse(R"({"encoder": {"layers": 3}})"));
    FAIL("unknown key accepted");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "unknown config key encoder.layers");
  }
  CHECK_THROWS_AS(update_from_json(partial, json::parse(R"({"train": {"steps": "many"}})")),
                  ConfigError);
  CHECK_THROWS_AS(update_from_json(partial, json::parse(R"({"train": {"seed": -1}})")),
                  ConfigError);

  RunConfig base;
  const auto grid = ablation_grid(base);
  REQUIRE(grid.size() == 8);
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(config_diff(base, grid[i].second).size() == 1);
  CHECK(config_diff(base, base).empty());
}

TEST_CASE("error to exit code mapping") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(DataError("x")) == 3);
  CHECK(exit_code_for(AlignmentError("x")) == 4);
  CHECK(exit_code_for(CheckpointError("x")) == 5);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
  std::ostringstream err;
  CHECK(run_guarded([] { throw DataError("broken row"); }, err) == 3);
  CHECK(err.str().find("broken row") != std::string::npos);
  CHECK(run_guarded([] {}, err) == 0);
}
