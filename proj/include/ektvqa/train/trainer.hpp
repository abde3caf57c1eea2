// Copyright 2026 The EKTVQA Authors
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

#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ektvqa/eval/metrics.hpp"
#include "ektvqa/io/config.hpp"
#include "ektvqa/knowledge/knowledge.hpp"
#include "ektvqa/model/model.hpp"

namespace ektvqa::train {

struct PreparedData {
  model::AnswerVocab vocab;
  std::vector<model::PreparedInstance> train;
  std::vector<model::PreparedInstance> val;
};

// Loads vocabulary, datasets and (for knowledge variants) the KB snapshot,
// applies the optional feature file, and runs the knowledge pipeline on
// every instance. Fully deterministic for a given config.
PreparedData load_and_prepare(const io::RunConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_accuracy = 0;
  double learning_rate = 0;
  std::size_t unmatched_targets = 0;
};

struct TrainResult {
  nn::Checkpoint best;  // best validation accuracy
  double best_val_accuracy = 0;
  std::vector<EpochLog> log;
};

// Full training driver: epoch loop with per-epoch greedy-decode validation,
// halving the learning rate after `plateau_patience` epochs without
// improvement, keeping the best-validation checkpoint. A non-finite loss
// aborts with an E_NAN diagnostic dump.
TrainResult run_train(const io::RunConfig& cfg, PreparedData& data,
                      std::ostream* epoch_log = nullptr);

struct Report {
  double accuracy = 0;
  double anls_score = 0;
  eval::UpperBoundReport ub;
  std::size_t n = 0;
};

// Greedy decoding over a dataset: accuracy (soft-vote when records carry
// ten ground truths, exact match otherwise), ANLS, and the upper bounds.
Report evaluate(const model::Model& m,
                const std::vector<model::PreparedInstance>& data,
                std::size_t answer_count,
                std::vector<std::pair<std::int64_t, std::string>>* preds =
                    nullptr);

// Fixed-point metric block, 4 decimals per value.
std::string format_report(const Report& report);

}  // namespace ektvqa::train
