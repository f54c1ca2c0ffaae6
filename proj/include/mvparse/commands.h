// Copyright 2026 The mvparse Authors. All Rights Reserved.
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

#ifndef MVPARSE_COMMANDS_H_
#define MVPARSE_COMMANDS_H_

#include <ostream>
#include <string>
#include <vector>

#include "mvparse/config.h"
#include "mvparse/dataset.h"
#include "mvparse/toyparser.h"

namespace mvparse {

// Raised for invalid arguments or configuration; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Seed of one frame derived from the run seed.
uint64_t frame_seed(uint64_t run_seed, int frame);

void cmd_synth(const RunConfig& config, const std::string& output_dir, std::ostream& log);

// Returns the number of frames that failed; throws if every frame failed.
int cmd_annotate(const RunConfig& config, const std::string& dataset_dir, std::ostream& log);

std::vector<TrainingFrame> load_training_frames(const RunConfig& config, const std::string& dataset_dir,
                                                MaskSource source);

ToyParser load_or_init_parser(const RunConfig& config, const std::string& weights);

void cmd_pretrain(const RunConfig& config, const std::string& dataset_dir, const std::string& init,
                  const std::string& out_weights, std::ostream& log);

std::string history_csv(const std::vector<EpochStats>& history, Objective mode);

FinetuneResult cmd_finetune(const RunConfig& config, const std::string& dataset_dir, Objective mode,
                            MaskSource source, const std::string& init, const std::string& out_weights,
                            const std::string& history_path, std::ostream& log);

void cmd_predict(const RunConfig& config, const std::string& dataset_dir, const std::string& weights,
                 const std::string& pred_dir, std::ostream& log);

// Writes metrics JSON to `json_path` (if non-empty) and the text table to `log`. Returns the
// missing-frame fraction.
double cmd_evaluate(const RunConfig& config, const std::string& pred_dir, const std::string& dataset_dir,
                    const std::string& json_path, std::ostream& log);

enum class SweepAxis { kViews, kBeta };

// Fine-tunes once per setting and evaluates on `eval_dir` (the training set when empty).
std::string cmd_sweep(const RunConfig& config, const std::string& dataset_dir, const std::string& eval_dir,
                      SweepAxis axis, Objective mode, const std::string& init, std::ostream& log);

// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace mvparse

#endif  // MVPARSE_COMMANDS_H_
