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

#include "ektvqa/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ektvqa/error.hpp"
#include "ektvqa/io/dataset.hpp"
#include "ektvqa/strings.hpp"

namespace ektvqa::train {

namespace {

// Exact-match accuracy against any ground truth; soft vote when a record
// carries the ten-answer annotation.
double answer_score(const std::string& prediction,
                    const std::vector<std::string>& gts,
                    std::size_t answer_count) {
  if (answer_count == 10 && gts.size() == 10) {
    return eval::vqa_accuracy(prediction, gts);
  }
  const std::string pred = normalize_answer(prediction);
  for (const std::string& gt : gts) {
    if (normalize_answer(gt) == pred) return 1.0;
  }
  return 0.0;
}

}  // namespace

PreparedData load_and_prepare(const io::RunConfig& cfg) {
  cfg.validate();
  PreparedData data;
  data.vocab = model::AnswerVocab::load(io::resolve_path(cfg.vocab_path));

  std::optional<knowledge::KBSnapshot> kb;
  const model::ModelConfig mc = cfg.model_config();
  if (model::variant_uses_knowledge(mc.variant) && !cfg.kb_path.empty()) {
    kb = knowledge::KBSnapshot::load(io::resolve_path(cfg.kb_path),
                                     cfg.kb_raw_cap);
  }

  auto prepare_split = [&](const std::string& path, Rng& policy_rng) {
    std::vector<model::PreparedInstance> out;
    if (path.empty()) return out;
    std::vector<features::QAInstance> raw =
        io::ingest_dataset(io::resolve_path(path), cfg.ingest_options());
    if (!cfg.features_path.empty()) {
      io::apply_feature_file(raw, io::resolve_path(cfg.features_path),
                             cfg.fr_dim);
    }
    out.reserve(raw.size());
    for (features::QAInstance& inst : raw) {
      out.push_back(model::prepare_instance(
          std::move(inst), kb ? &*kb : nullptr, mc, policy_rng));
    }
    return out;
  };

  Rng policy_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  data.train = prepare_split(cfg.train_path, policy_rng);
  data.val = prepare_split(cfg.val_path, policy_rng);
  return data;
}

Report evaluate(const model::Model& m,
                const std::vector<model::PreparedInstance>& data,
                std::size_t answer_count,
                std::vector<std::pair<std::int64_t, std::string>>* preds) {
  Report report;
  report.n = data.size();
  if (data.empty()) return report;

  std::vector<eval::EvalRecord> records;
  records.reserve(data.size());
  double acc = 0.0;
  std::vector<features::QAInstance> raw;
  raw.reserve(data.size());
  for (const model::PreparedInstance& pi : data) {
    const std::string answer = m.generate_answer(pi).answer;
    acc += answer_score(answer, pi.inst.answers, answer_count);
    eval::EvalRecord rec;
    rec.prediction = normalize_answer(answer);
    for (const std::string& gt : pi.inst.answers) {
      rec.ground_truths.push_back(normalize_answer(gt));
    }
    records.push_back(std::move(rec));
    raw.push_back(pi.inst);
    if (preds) preds->emplace_back(pi.inst.question_id, answer);
  }
  report.accuracy = acc / static_cast<double>(data.size());
  report.anls_score = eval::anls(records);
  report.ub = eval::upper_bounds(raw, m.vocab());
  return report;
}

TrainResult run_train(const io::RunConfig& cfg, PreparedData& data,
                      std::ostream* epoch_log) {
  if (data.train.empty()) fail("E_CONFIG", "run_train: empty training set");
  model::Model m(cfg.model_config(), data.vocab);
  nn::AdamOptimizer opt(cfg.learning_rate);

  TrainResult result;
  result.best = nn::Checkpoint::from_store(m.params());
  std::size_t since_improve = 0;

  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(cfg.seed * 0x100000001b3ull + epoch + 1);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::size_t unmatched = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      std::vector<model::PreparedInstance> batch;
      const std::size_t stop =
          std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(data.train[order[i]]);
      }
      try {
        loss_sum += m.train_step(batch, opt, &unmatched);
      } catch (const Error& e) {
        if (std::string(e.code()) == "E_NAN") {
          std::ostringstream diag;
          diag << "non-finite loss at epoch " << epoch << " batch " << batches
               << "; lr=" << opt.learning_rate();
          fail("E_NAN", diag.str());
        }
        throw;
      }
      ++batches;
    }

    const Report val = evaluate(m, data.val, cfg.answer_count);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, batches));
    log.val_accuracy = val.accuracy;
    log.learning_rate = opt.learning_rate();
    log.unmatched_targets = unmatched;
    result.log.push_back(log);
    if (epoch_log) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "{\"epoch\":%zu,\"loss\":%.6f,\"val_accuracy\":%.4f,"
                    "\"lr\":%.6g,\"unmatched\":%zu}",
                    log.epoch, log.train_loss, log.val_accuracy,
                    log.learning_rate, log.unmatched_targets);
      (*epoch_log) << buf << "\n";
    }

    if (val.accuracy > result.best_val_accuracy ||
        (epoch == 0 && data.val.empty())) {
      result.best_val_accuracy = val.accuracy;
      result.best = nn::Checkpoint::from_store(m.params());
      since_improve = 0;
    } else {
      ++since_improve;
      if (since_improve >= cfg.plateau_patience) {
        opt.set_learning_rate(opt.learning_rate() * cfg.plateau_factor);
        since_improve = 0;
      }
    }
  }
  if (data.val.empty()) {
    result.best = nn::Checkpoint::from_store(m.params());
  }
  return result;
}

std::string format_report(const Report& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "accuracy %.4f\nanls %.4f\nocr_ub %.4f\nvocab_ub %.4f\n"
                "both_ub %.4f\nn %zu\n",
                report.accuracy, report.anls_score, report.ub.ocr_ub,
                report.ub.vocab_ub, report.ub.both_ub, report.n);
  return std::string(buf);
}

}  // namespace ektvqa::train
