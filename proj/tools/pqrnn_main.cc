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

// pqrnn: train, distill, evaluate and run pQRNN intent/slot models.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pqrnn/commands.h"
#include "pqrnn/training.h"

int main(int argc, char** argv) {
  using namespace pqrnn;
  CLI::App app{"pQRNN joint intent and slot models"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, checkpoint, data_path, output, teacher_logits;
  Overrides flags;
  bool bench = false;
  int threads = default_thread_count();
  SyntheticConfig synth;

  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--steps", flags.steps, "Training steps");
  app.add_option("--batch-size", flags.batch_size, "Examples per step");
  app.add_option("--teacher-logit-scale", flags.teacher_logit_scale,
                 "Multiplier on teacher logits before the softmax");
  app.add_option("--augment-ratio", flags.augment_ratio,
                 "Augmented queries per supervised query (0, 1, 4 or 8)");
  app.add_option("--seed", flags.seed, "Training seed");
  app.add_option("--out-dir", flags.out_dir, "Output directory");
  app.add_flag("--bench", bench, "Print prediction throughput");
  app.add_option("--threads", threads, "Worker threads for inference")
      ->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Supervised training");
  auto* distill = app.add_subcommand("distill", "Distill from teacher logits");
  distill->add_option("--teacher-logits", teacher_logits,
                      "Teacher JSONL (overrides data.teacher_logits)");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--data", data_path, "Labeled TSV")->required();
  auto* predict = app.add_subcommand("predict", "Parse queries from stdin");
  predict->add_option("--checkpoint", checkpoint)->required();
  auto* ablate = app.add_subcommand("ablate", "One-switch ablation grid");
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  synth_cmd->add_option("--intents", synth.num_intents);
  synth_cmd->add_option("--slot-types", synth.num_slot_types);
  synth_cmd->add_option("--vocab-size", synth.vocab_size);
  synth_cmd->add_option("--train", synth.num_train);
  synth_cmd->add_option("--dev", synth.num_dev);
  synth_cmd->add_option("--test", synth.num_test);
  synth_cmd->add_option("--augmented", synth.num_augmented);
  auto* export_cmd = app.add_subcommand("export-logits", "Write teacher logits");
  export_cmd->add_option("--checkpoint", checkpoint)->required();
  export_cmd->add_option("--data", data_path, "TSV of queries")->required();
  export_cmd->add_option("--output", output, "JSONL path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  return run_guarded(
      [&] {
        if (*synth_cmd) {
          if (flags.seed) synth.seed = *flags.seed;
          const std::string dir = flags.out_dir.value_or("synthetic");
          cmd_synth(synth, dir);
          std::cerr << "wrote synthetic dataset to " << dir << "\n";
        } else if (*eval) {
          cmd_eval(checkpoint, data_path, std::cout, threads);
        } else if (*predict) {
          cmd_predict(checkpoint, std::cin, std::cout, std::cerr, bench, threads);
        } else if (*export_cmd) {
          const int n = cmd_export_logits(checkpoint, data_path, output, threads);
          std::cerr << "wrote " << n << " teacher records to " << output << "\n";
        } else {
          RunConfig config = resolve_config(config_path, flags);
          if (*train) {
            cmd_train(config, std::cerr);
          } else if (*distill) {
            if (!teacher_logits.empty()) config.data.teacher_logits = teacher_logits;
            cmd_distill(config, std::cerr);
          } else if (*ablate) {
            cmd_ablate(config, std::cerr);
          }
        }
      },
      std::cerr);
}
