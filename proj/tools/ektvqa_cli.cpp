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

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "ektvqa/error.hpp"
#include "ektvqa/eval/metrics.hpp"
#include "ektvqa/io/config.hpp"
#include "ektvqa/io/dataset.hpp"
#include "ektvqa/knowledge/knowledge.hpp"
#include "ektvqa/model/model.hpp"
#include "ektvqa/strings.hpp"
#include "ektvqa/synth/generator.hpp"
#include "ektvqa/train/trainer.hpp"

namespace {

using namespace ektvqa;

// Remaining "--key value" pairs override config fields.
io::RunConfig config_with_overrides(const std::string& config_path,
                                    const std::vector<std::string>& extra) {
  io::RunConfig cfg =
      config_path.empty() ? io::RunConfig{} : io::load_config(config_path);
  for (std::size_t i = 0; i < extra.size(); ++i) {
    std::string key = extra[i];
    if (key.rfind("--", 0) != 0 || i + 1 >= extra.size()) {
      fail("E_CONFIG", "expected --key value override, got: " + key);
    }
    io::apply_override(cfg, key.substr(2), extra[++i]);
  }
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(path);
  if (!os) fail("E_IO", "cannot write: " + path);
  os << text;
}

int cmd_gen_synthetic(const std::string& out_dir, std::size_t n,
                      std::size_t families, std::size_t vocab,
                      std::size_t distractors, std::size_t candidates,
                      double train_ratio, std::uint64_t seed) {
  synth::SyntheticSpec spec;
  spec.n_instances = n;
  spec.n_entity_families = families;
  spec.vocab_size = vocab;
  spec.distractors = distractors;
  spec.candidates_per_token = candidates;
  spec.train_ratio = train_ratio;
  spec.seed = seed;
  const synth::SyntheticOutput out = synth::gen_synthetic(spec, out_dir);
  std::cout << "train " << out.train_path << " (" << out.n_train << ")\n"
            << "val " << out.val_path << " (" << out.n_val << ")\n"
            << "kb " << out.kb_path << "\n"
            << "vocab " << out.vocab_path << "\n";
  return 0;
}

int cmd_train(const io::RunConfig& cfg, const std::string& checkpoint_out,
              const std::string& log_path) {
  train::PreparedData data = train::load_and_prepare(cfg);
  std::ofstream log_file;
  std::ostream* log_stream = &std::cout;
  if (!log_path.empty()) {
    log_file.open(log_path);
    if (!log_file) fail("E_IO", "cannot write metrics log: " + log_path);
    log_stream = &log_file;
  }
  const train::TrainResult result = train::run_train(cfg, data, log_stream);
  result.best.save(checkpoint_out);
  std::cout << "best_val_accuracy " << result.best_val_accuracy << "\n"
            << "checkpoint " << checkpoint_out << "\n";
  return 0;
}

int cmd_eval(const io::RunConfig& cfg, const std::string& checkpoint,
             const std::string& dataset, const std::string& report_path,
             const std::string& predictions_path) {
  io::RunConfig eval_cfg = cfg;
  eval_cfg.train_path.clear();
  eval_cfg.val_path = dataset;
  train::PreparedData data = train::load_and_prepare(eval_cfg);
  model::Model m(eval_cfg.model_config(), data.vocab);
  nn::Checkpoint::load(checkpoint).apply_to(m.params());
  std::vector<std::pair<std::int64_t, std::string>> preds;
  const train::Report report =
      train::evaluate(m, data.val, eval_cfg.answer_count, &preds);
  if (!predictions_path.empty()) io::write_predictions(preds, predictions_path);
  write_text(report_path, train::format_report(report));
  return 0;
}

int cmd_transfer(const io::RunConfig& cfg, const std::string& source,
                 const std::string& source_variant,
                 const std::string& target_variant, const std::string& out) {
  io::RunConfig target_cfg = cfg;
  target_cfg.variant = target_variant;
  // The source variant is named for the record; shared parameters are
  // matched by name, so it only has to parse.
  model::variant_from_string(source_variant);
  model::AnswerVocab vocab =
      model::AnswerVocab::load(io::resolve_path(target_cfg.vocab_path));
  const nn::Checkpoint src = nn::Checkpoint::load(source);
  const nn::Checkpoint dst =
      model::transfer_weights(src, target_cfg.model_config(), vocab);
  dst.save(out);
  std::cout << "transferred " << dst.tensors.size() << " tensors to " << out
            << "\n";
  return 0;
}

int cmd_kb_filter(const io::RunConfig& cfg, const std::string& dataset,
                  const std::string& out_path) {
  io::RunConfig lcfg = cfg;
  lcfg.train_path.clear();
  lcfg.val_path = dataset;
  train::PreparedData data = train::load_and_prepare(lcfg);
  std::ofstream os(out_path);
  if (!os) fail("E_IO", "cannot write fact table: " + out_path);
  for (const model::PreparedInstance& pi : data.val) {
    nlohmann::json rec;
    rec["question_id"] = pi.inst.question_id;
    rec["facts"] = nlohmann::json::array();
    for (std::size_t i = 0; i < pi.inst.ocr.size(); ++i) {
      nlohmann::json f;
      f["token"] = pi.inst.ocr[i].text;
      f["candidates"] = nlohmann::json::array();
      for (const auto& c : pi.cands[i].candidates) {
        f["candidates"].push_back({{"name", c.name},
                                   {"description", c.description},
                                   {"attribute", c.attribute}});
      }
      rec["facts"].push_back(std::move(f));
    }
    os << rec.dump() << "\n";
  }
  std::cout << "facts written to " << out_path << "\n";
  return 0;
}

int cmd_report(const std::string& predictions_path,
               const std::string& dataset_path, std::size_t answer_count,
               const std::string& vocab_path, const std::string& out_path) {
  io::IngestOptions opts;
  opts.answer_count = answer_count;
  const std::vector<features::QAInstance> data =
      io::ingest_dataset(io::resolve_path(dataset_path), opts);

  std::ifstream is(predictions_path);
  if (!is) fail("E_IO", "cannot open predictions: " + predictions_path);
  std::map<std::int64_t, std::string> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("E_SCHEMA",
           "predictions line " + std::to_string(line_no) + ": " + e.what());
    }
    preds[rec.at("question_id").get<std::int64_t>()] =
        rec.at("answer").get<std::string>();
  }

  train::Report report;
  report.n = data.size();
  std::vector<eval::EvalRecord> records;
  double acc = 0.0;
  for (const features::QAInstance& inst : data) {
    auto it = preds.find(inst.question_id);
    const std::string pred = it == preds.end() ? "" : it->second;
    if (answer_count == 10 && inst.answers.size() == 10) {
      acc += eval::vqa_accuracy(pred, inst.answers);
    } else {
      const std::string np = normalize_answer(pred);
      bool hit = false;
      for (const std::string& gt : inst.answers) hit = hit || gt == np;
      acc += hit ? 1.0 : 0.0;
    }
    eval::EvalRecord rec;
    rec.prediction = normalize_answer(pred);
    rec.ground_truths = inst.answers;
    records.push_back(std::move(rec));
  }
  if (!records.empty()) {
    report.accuracy = acc / static_cast<double>(records.size());
    report.anls_score = eval::anls(records);
  }
  model::AnswerVocab vocab =
      vocab_path.empty()
          ? model::AnswerVocab::from_words({})
          : model::AnswerVocab::load(io::resolve_path(vocab_path));
  report.ub = eval::upper_bounds(data, vocab);
  write_text(out_path, train::format_report(report));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"external-knowledge scene-text VQA toolkit"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, checkpoint_out, dataset, report_path;
  std::string predictions_path, log_path, out_dir, out_path;
  std::string source_variant = "ektvqa", target_variant = "tvqa";
  std::string vocab_path;
  std::size_t n = 600, families = 6, vocab_size = 30, distractors = 3;
  std::size_t candidates = 3, answer_count = 1;
  double train_ratio = 5.0 / 6.0;
  std::uint64_t seed = 0;

  CLI::App* gen = app.add_subcommand("gen-synthetic",
                                     "generate the synthetic task");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--n", n, "total instances");
  gen->add_option("--families", families, "entity families");
  gen->add_option("--vocab-size", vocab_size, "vocabulary size");
  gen->add_option("--distractors", distractors, "distractor tokens");
  gen->add_option("--candidates", candidates, "candidates per token");
  gen->add_option("--train-ratio", train_ratio, "train split fraction");
  gen->add_option("--seed", seed, "generator seed");

  CLI::App* tr = app.add_subcommand("train", "train a variant");
  tr->add_option("--config", config_path, "config JSON")->required();
  tr->add_option("--checkpoint-out", checkpoint_out, "output checkpoint")
      ->required();
  tr->add_option("--log", log_path, "per-epoch metrics log (JSONL)");
  tr->allow_extras();

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--config", config_path, "config JSON")->required();
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  ev->add_option("--dataset", dataset, "dataset JSONL")->required();
  ev->add_option("--report", report_path, "report path (stdout if empty)");
  ev->add_option("--predictions", predictions_path, "predictions JSONL path");
  ev->allow_extras();

  CLI::App* tw = app.add_subcommand("transfer-weights",
                                    "move shared weights across variants");
  tw->add_option("--config", config_path, "config JSON")->required();
  tw->add_option("--source", checkpoint, "source checkpoint")->required();
  tw->add_option("--source-variant", source_variant, "source variant");
  tw->add_option("--target-variant", target_variant, "target variant")
      ->required();
  tw->add_option("--out", checkpoint_out, "output checkpoint")->required();
  tw->allow_extras();

  CLI::App* kf = app.add_subcommand(
      "kb-filter", "run lookup+filter+bind over a dataset");
  kf->add_option("--config", config_path, "config JSON")->required();
  kf->add_option("--dataset", dataset, "dataset JSONL")->required();
  kf->add_option("--out", out_path, "fact table output")->required();
  kf->allow_extras();

  CLI::App* rp = app.add_subcommand("report", "score a predictions file");
  rp->add_option("--predictions", predictions_path, "predictions JSONL")
      ->required();
  rp->add_option("--dataset", dataset, "dataset JSONL")->required();
  rp->add_option("--answer-count", answer_count, "expected answers (0=any)");
  rp->add_option("--vocab", vocab_path, "vocabulary for the upper bounds");
  rp->add_option("--report", out_path, "report path (stdout if empty)");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) {
      return cmd_gen_synthetic(out_dir, n, families, vocab_size, distractors,
                               candidates, train_ratio, seed);
    }
    if (tr->parsed()) {
      io::RunConfig cfg = config_with_overrides(config_path, tr->remaining());
      cfg.validate();
      return cmd_train(cfg, checkpoint_out, log_path);
    }
    if (ev->parsed()) {
      io::RunConfig cfg = config_with_overrides(config_path, ev->remaining());
      return cmd_eval(cfg, checkpoint, dataset, report_path,
                      predictions_path);
    }
    if (tw->parsed()) {
      io::RunConfig cfg = config_with_overrides(config_path, tw->remaining());
      return cmd_transfer(cfg, checkpoint, source_variant, target_variant,
                          checkpoint_out);
    }
    if (kf->parsed()) {
      io::RunConfig cfg = config_with_overrides(config_path, kf->remaining());
      return cmd_kb_filter(cfg, dataset, out_path);
    }
    if (rp->parsed()) {
      return cmd_report(predictions_path, dataset, answer_count, vocab_path,
                        out_path);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ektvqa::Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: E_INTERNAL: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
