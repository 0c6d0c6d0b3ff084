// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "checkpoint.hpp"
#include "errors.hpp"
#include "json.hpp"
#include "tags.hpp"

namespace mmie {

namespace {

constexpr std::uint64_t kTrainStreamSalt = 0x9E3779B97F4A7C15ULL;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (eval_batch_size < 1) throw ConfigError("eval_batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw ConfigError("warmup_fraction must be in [0, 1]");
  if (!(lambda_sem >= 0.0)) throw ConfigError("lambda_sem must be >= 0");
  if (!(max_grad_norm >= 0.0)) throw ConfigError("max_grad_norm must be >= 0");
}

RunConfig RunConfig::from_config(const KeyValueConfig& c) {
  RunConfig r;
  r.model = ModelConfig::from_config(c);
  const bool ner = r.model.task == Task::NER;
  const std::string dir = c.get_string("data_dir", ".");
  r.train_path = c.get_string("train_path", (std::filesystem::path(dir) / "train.jsonl").string());
  r.val_path = c.get_string("val_path", (std::filesystem::path(dir) / "val.jsonl").string());
  r.test_path = c.get_string("test_path", (std::filesystem::path(dir) / "test.jsonl").string());
  r.lambda_sem = c.get_double("lambda_sem", r.lambda_sem);
  r.batch_size = static_cast<int>(c.get_int("batch_size", ner ? 8 : 16));
  r.epochs = static_cast<int>(c.get_int("epochs", ner ? 30 : 25));
  r.learning_rate = c.get_double("learning_rate", r.learning_rate);
  r.weight_decay = c.get_double("weight_decay", r.weight_decay);
  r.warmup_fraction = c.get_double("warmup_fraction", r.warmup_fraction);
  r.max_grad_norm = c.get_double("max_grad_norm", r.max_grad_norm);
  r.eval_batch_size = static_cast<int>(c.get_int("eval_batch_size", r.eval_batch_size));
  r.seed = static_cast<std::uint64_t>(c.get_int("seed", 1));
  r.no_semantic_loss = c.get_bool("no_semantic_loss", false);
  r.no_attnmixup = c.get_bool("no_attnmixup", false);
  r.validate();
  return r;
}

std::string RunConfig::canonical() const {
  nlohmann::ordered_json j;
  j["model"] = nlohmann::json::parse(model.to_json());
  j["lambda_sem"] = lambda_sem;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["weight_decay"] = weight_decay;
  j["warmup_fraction"] = warmup_fraction;
  j["max_grad_norm"] = max_grad_norm;
  j["eval_batch_size"] = eval_batch_size;
  j["seed"] = seed;
  j["no_semantic_loss"] = no_semantic_loss;
  j["no_attnmixup"] = no_attnmixup;
  return j.dump();
}

std::string RunConfig::stem() const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "run-%016" PRIx64 "-s%" PRIu64, hash(), seed);
  return buf;
}

double schedule_factor(long long step, long long total_steps, long long warmup_steps) {
  if (step < warmup_steps) return double(step) / double(std::max(1LL, warmup_steps));
  return std::max(0.0, double(total_steps - step) / double(std::max(1LL, total_steps - warmup_steps)));
}

AdamW::AdamW(ParamStore& params, double weight_decay, double beta1, double beta2, double eps)
    : params_(params), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, v] : params_.entries()) {
    m_.push_back(Matrix::Zero(v.rows(), v.cols()));
    v_.push_back(Matrix::Zero(v.rows(), v.cols()));
    decay_.push_back(name.size() >= 6 && name.compare(name.size() - 6, 6, "weight") == 0);
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  const auto& entries = params_.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ag::Var p = entries[i].second;
    if (!p.node()->has_grad()) continue;
    const Matrix& g = p.node()->grad;
    Matrix& w = p.mutable_value();
    if (decay_[i]) w *= 1.0 - lr * weight_decay_;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    w.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

std::string EpochLog::to_line() const {
  return "epoch=" + std::to_string(epoch) + " loss=" + fmt17(loss) + " task=" + fmt17(task_loss) +
         " sem=" + fmt17(semantic_loss) + " val_p=" + fmt17(validation.precision) +
         " val_r=" + fmt17(validation.recall) + " val_f1=" + fmt17(validation.f1);
}

std::vector<std::string> label_names(const ModelConfig& cfg) {
  if (cfg.task == Task::NER) return BioScheme::with_default_names(cfg.num_entity_types).type_names();
  return relation_names(cfg.num_relation_types);
}

std::vector<Prediction> predict_all(const Model& model, const std::vector<Sample>& samples, int batch_size) {
  std::vector<Prediction> out;
  out.reserve(samples.size());
  std::vector<const Sample*> batch;
  for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch_size)) {
    batch.clear();
    for (std::size_t j = i; j < std::min(samples.size(), i + static_cast<std::size_t>(batch_size)); ++j)
      batch.push_back(&samples[j]);
    for (auto& p : model.predict(batch)) out.push_back(std::move(p));
  }
  return out;
}

MetricsReport score(const ModelConfig& cfg, const std::vector<Sample>& gold, const std::vector<Prediction>& pred) {
  if (gold.size() != pred.size()) throw ShapeError("score: prediction count differs from gold count");
  if (cfg.task == Task::NER) {
    std::vector<SpanSet> g;
    std::vector<SpanSet> p;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      g.push_back(bio_to_spans(gold[i].ner_labels, cfg.num_tags()));
      p.push_back(bio_to_spans(pred[i].tags, cfg.num_tags()));
    }
    return micro_prf(std::span<const SpanSet>(g), std::span<const SpanSet>(p), label_names(cfg));
  }
  std::vector<int> g;
  std::vector<int> p;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    g.push_back(gold[i].relation);
    p.push_back(pred[i].relation);
  }
  return micro_prf(std::span<const int>(g), std::span<const int>(p), label_names(cfg), 0);
}

MetricsReport score_corpora(Task task, int num_labels_or_types, const std::vector<Sample>& gold,
                            const std::vector<Sample>& pred) {
  if (gold.size() != pred.size()) throw ShapeError("score: prediction count differs from gold count");
  ModelConfig cfg;
  cfg.task = task;
  if (task == Task::NER)
    cfg.num_entity_types = num_labels_or_types;
  else
    cfg.num_relation_types = num_labels_or_types;
  std::vector<Prediction> p(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].id != gold[i].id) throw ShapeError("score: record " + std::to_string(i) + " ids differ");
    p[i].tags = pred[i].ner_labels;
    p[i].relation = pred[i].relation;
  }
  return score(cfg, gold, p);
}

MetricsReport evaluate(const Model& model, const std::vector<Sample>& samples, int batch_size) {
  return score(model.config(), samples, predict_all(model, samples, batch_size));
}

std::vector<Sample> with_predictions(const std::vector<Sample>& gold, const std::vector<Prediction>& pred) {
  std::vector<Sample> out = gold;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].task == Task::NER)
      out[i].ner_labels = pred[i].tags;
    else
      out[i].relation = pred[i].relation;
  }
  return out;
}

TrainResult train(const RunConfig& cfg, Model& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training split is empty");
  Rng rng(cfg.seed ^ kTrainStreamSalt);
  AdamW opt(model.params(), cfg.weight_decay);
  const LossOptions loss_opts{cfg.lambda_sem, !cfg.no_semantic_loss, !cfg.no_attnmixup};

  const long long per_epoch =
      (static_cast<long long>(train_set.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const long long total_steps = per_epoch * cfg.epochs;
  const auto warmup_steps = static_cast<long long>(std::ceil(cfg.warmup_fraction * double(total_steps)));

  TrainResult result;
  std::vector<Matrix> best_weights = model.params().snapshot();
  double best_f1 = -1.0;
  std::vector<std::size_t> order(train_set.size());
  std::vector<const Sample*> batch;
  long long step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    double loss_sum = 0.0, task_sum = 0.0, sem_sum = 0.0;
    for (long long b = 0; b < per_epoch; ++b) {
      batch.clear();
      const std::size_t lo = static_cast<std::size_t>(b) * static_cast<std::size_t>(cfg.batch_size);
      for (std::size_t i = lo; i < std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size)); ++i)
        batch.push_back(&train_set[order[i]]);

      model.params().zero_grad();
      LossBreakdown parts;
      const ag::Var loss = model.batch_loss(batch, loss_opts, ForwardContext::training(rng), &parts);
      ag::backward(loss);

      if (cfg.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (const auto& [name, v] : model.params().entries())
          if (v.node()->has_grad()) sq += v.node()->grad.squaredNorm();
        const double norm = std::sqrt(sq);
        if (norm > cfg.max_grad_norm)
          for (const auto& [name, v] : model.params().entries())
            if (v.node()->has_grad()) v.node()->grad *= cfg.max_grad_norm / norm;
      }
      opt.step(cfg.learning_rate * schedule_factor(step, total_steps, warmup_steps));
      ++step;
      loss_sum += parts.total;
      task_sum += parts.task;
      sem_sum += parts.semantic;
    }

    EpochLog log;
    log.epoch = epoch;
    log.loss = loss_sum / double(per_epoch);
    log.task_loss = task_sum / double(per_epoch);
    log.semantic_loss = sem_sum / double(per_epoch);
    log.validation = evaluate(model, val_set, cfg.eval_batch_size);
    if (log.validation.f1 > best_f1) {
      best_f1 = log.validation.f1;
      result.best_epoch = epoch;
      result.best_validation = log.validation;
      best_weights = model.params().snapshot();
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  model.params().restore(best_weights);
  model.params().zero_grad();
  return result;
}

RunOutputs run_training(const RunConfig& cfg, const std::string& out_dir, const EpochCallback& on_epoch) {
  cfg.validate();
  const auto train_set = read_corpus(cfg.train_path);
  const auto val_set = read_corpus(cfg.val_path);
  const auto test_set = read_corpus(cfg.test_path);
  for (const auto* split : {&train_set, &val_set, &test_set})
    for (const auto& s : *split)
      if (s.task != cfg.task())
        throw ConfigError("corpus sample " + s.id + " is " + task_name(s.task) + " but the run is " +
                          task_name(cfg.task()));
  if (val_set.empty() || test_set.empty()) throw ConfigError("validation and test splits must be non-empty");

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  const std::string stem = cfg.stem();

  Model model(cfg.model);
  RunOutputs out;
  std::ofstream log_file(dir / (stem + ".epochs.log"));
  if (!log_file) throw IoError("cannot write epoch log in " + out_dir);
  out.result = train(cfg, model, train_set, val_set, [&](const EpochLog& e) {
    log_file << e.to_line() << '\n';
    log_file.flush();
    if (on_epoch) on_epoch(e);
  });
  out.log_path = (dir / (stem + ".epochs.log")).string();

  out.checkpoint_path = (dir / (stem + ".ckpt")).string();
  save_checkpoint(model, out.checkpoint_path);
  write_label_manifest(cfg.task() == Task::NER ? BioScheme::with_default_names(cfg.model.num_entity_types).tag_names()
                                               : relation_names(cfg.model.num_relation_types),
                       (dir / (stem + (cfg.task() == Task::NER ? ".tags.txt" : ".relations.txt"))).string());

  out.test = evaluate(model, test_set, cfg.eval_batch_size);

  nlohmann::ordered_json report = nlohmann::ordered_json::parse(out.test.to_json());
  report["run"] = stem;
  report["task"] = task_name(cfg.task());
  report["seed"] = cfg.seed;
  report["ablation"] = {{"no_semantic_loss", cfg.no_semantic_loss}, {"no_attnmixup", cfg.no_attnmixup}};
  report["best_epoch"] = out.result.best_epoch;
  report["validation"] = nlohmann::ordered_json::parse(out.result.best_validation.to_json());
  report["config"] = nlohmann::ordered_json::parse(cfg.canonical());
  out.report_json = report.dump(2);
  out.report_path = (dir / (stem + ".report.json")).string();
  std::ofstream rf(out.report_path);
  if (!rf) throw IoError("cannot write report " + out.report_path);
  rf << out.report_json << '\n';
  return out;
}

}  // namespace mmie
