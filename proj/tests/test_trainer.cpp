// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <regex>

#include "checkpoint.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "json.hpp"
#include "trainer.hpp"

using namespace mmie;
namespace fs = std::filesystem;

namespace {

ModelConfig small_model(Task task, double dropout) {
  ModelConfig m;
  m.task = task;
  m.text.vocab_size = 40;
  m.text.d_model = 8;
  m.text.num_layers = 2;
  m.text.num_heads = 2;
  m.text.ffn_dim = 16;
  m.text.dropout = dropout;
  m.image.channels = {4, 6};
  m.image.pooled_dim = 8;
  m.image.image_size = 8;
  m.image.object_size = 4;
  m.attn.num_heads = 2;
  m.attn.dropout = dropout;
  m.latent_dim = 4;
  m.num_entity_types = 2;
  m.num_relation_types = 4;
  return m;
}

Corpus small_corpus(Task task, std::uint64_t seed = 5) {
  CorpusSpec s;
  s.task = task;
  s.vocab_size = 40;
  s.num_entity_types = 2;
  s.num_relation_types = 4;
  s.num_train = 24;
  s.num_val = 8;
  s.num_test = 8;
  s.seed = seed;
  s.min_tokens = 5;
  s.max_tokens = 8;
  s.image_size = 8;
  s.object_size = 4;
  return generate_corpus(s);
}

RunConfig small_run(Task task) {
  RunConfig r;
  r.model = small_model(task, 0.1);
  r.batch_size = 6;
  r.epochs = 2;
  r.eval_batch_size = 4;
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

bool same_predictions(const std::vector<Prediction>& a, const std::vector<Prediction>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].tags != b[i].tags || a[i].relation != b[i].relation || a[i].scores != b[i].scores) return false;
  return true;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  CHECK(schedule_factor(0, 100, 10) == 0.0);
  CHECK(schedule_factor(5, 100, 10) == 0.5);
  CHECK(schedule_factor(10, 100, 10) == 1.0);
  CHECK(schedule_factor(55, 100, 10) == 0.5);
  CHECK(schedule_factor(100, 100, 10) == 0.0);
  CHECK(schedule_factor(0, 100, 0) == 1.0);
}

TEST_CASE("AdamW step matches a hand computation") {
  ParamStore store;
  ag::Var w = store.add("layer.weight", (Matrix(1, 2) << 1.0, -2.0).finished());
  ag::Var b = store.add("layer.bias", (Matrix(1, 1) << 0.5).finished());
  const Matrix c = (Matrix(1, 2) << 3.0, -0.25).finished();
  AdamW opt(store, 0.1);
  const double lr = 0.01;

  Matrix ew = w.value(), eb = b.value();
  Matrix mw = Matrix::Zero(1, 2), vw = Matrix::Zero(1, 2);
  double mb = 0.0, vb = 0.0;
  for (int t = 1; t <= 3; ++t) {
    store.zero_grad();
    // loss = w . c + 2 b^2
    ag::backward(ag::add(ag::sum_all(ag::mul(w, ag::constant(c))), ag::scale(ag::sum_all(ag::mul(b, b)), 2.0)));
    opt.step(lr);

    const double bc1 = 1.0 - std::pow(0.9, t), bc2 = 1.0 - std::pow(0.999, t);
    ew *= 1.0 - lr * 0.1;
    for (int j = 0; j < 2; ++j) {
      mw(0, j) = 0.9 * mw(0, j) + 0.1 * c(0, j);
      vw(0, j) = 0.999 * vw(0, j) + 0.001 * c(0, j) * c(0, j);
      ew(0, j) -= lr * (mw(0, j) / bc1) / (std::sqrt(vw(0, j) / bc2) + 1e-8);
    }
    const double gb = 4.0 * eb(0, 0);  // bias is not decayed
    mb = 0.9 * mb + 0.1 * gb;
    vb = 0.999 * vb + 0.001 * gb * gb;
    eb(0, 0) -= lr * (mb / bc1) / (std::sqrt(vb / bc2) + 1e-8);

    CHECK((w.value() - ew).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(std::abs(b.value()(0, 0) - eb(0, 0)) < 1e-15);
  }
  CHECK(opt.steps() == 3);
}

TEST_CASE("run configuration") {
  auto cfg = KeyValueConfig::parse("task=RE\ndata_dir=/data/re\nseed=9\n");
  const RunConfig re = RunConfig::from_config(cfg);
  CHECK(re.batch_size == 16);
  CHECK(re.epochs == 25);
  CHECK(re.seed == 9);
  CHECK(re.train_path == "/data/re/train.jsonl");
  CHECK(std::regex_match(re.stem(), std::regex("run-[0-9a-f]{16}-s9")));

  const RunConfig ner = RunConfig::from_config(KeyValueConfig::parse("task=NER\n"));
  CHECK(ner.batch_size == 8);
  CHECK(ner.epochs == 30);
  CHECK(ner.seed == 1);

  cfg.set("seed", "10");
  const RunConfig other = RunConfig::from_config(cfg);
  CHECK(other.stem() != re.stem());
  CHECK(RunConfig::from_config(KeyValueConfig::parse("task=RE\ndata_dir=/data/re\nseed=9\n")).canonical() ==
        re.canonical());

  CHECK_THROWS_AS(RunConfig::from_config(KeyValueConfig::parse("task=NER\nbatch_size=0\n")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_config(KeyValueConfig::parse("task=NER\nwarmup_fraction=2\n")), ConfigError);
}

TEST_CASE("training is deterministic for a fixed seed") {
  for (Task task : {Task::NER, Task::RE}) {
    const Corpus data = small_corpus(task);
    const RunConfig cfg = small_run(task);
    Model a(cfg.model), b(cfg.model);
    const TrainResult ra = train(cfg, a, data.train, data.val);
    const TrainResult rb = train(cfg, b, data.train, data.val);
    REQUIRE(ra.epochs.size() == 2);
    for (std::size_t e = 0; e < ra.epochs.size(); ++e) CHECK(ra.epochs[e].to_line() == rb.epochs[e].to_line());
    const auto sa = a.params().snapshot(), sb = b.params().snapshot();
    for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i] == sb[i]);

    RunConfig reseeded = cfg;
    reseeded.seed = 2;
    Model c(cfg.model);
    const TrainResult rc = train(reseeded, c, data.train, data.val);
    CHECK(rc.epochs[0].loss != ra.epochs[0].loss);
  }
}

TEST_CASE("training lowers the loss on a small corpus") {
  const Corpus data = small_corpus(Task::NER);
  RunConfig cfg = small_run(Task::NER);
  cfg.epochs = 6;
  cfg.learning_rate = 5e-3;
  Model m(cfg.model);
  const TrainResult r = train(cfg, m, data.train, data.val);
  CHECK(r.epochs.back().task_loss < r.epochs.front().task_loss);
  CHECK(r.best_epoch >= 1);
  CHECK(r.best_validation.f1 == r.epochs[static_cast<std::size_t>(r.best_epoch - 1)].validation.f1);
}

TEST_CASE("prediction is invariant to batch size, order and repetition") {
  for (Task task : {Task::NER, Task::RE}) {
    const Corpus data = small_corpus(task);
    Model m(small_model(task, 0.1));
    const auto base = predict_all(m, data.test, 1);
    CHECK(same_predictions(base, predict_all(m, data.test, 4)));
    CHECK(same_predictions(base, predict_all(m, data.test, 8)));

    std::vector<Sample> reversed(data.test.rbegin(), data.test.rend());
    auto rev = predict_all(m, reversed, 4);
    std::reverse(rev.begin(), rev.end());
    CHECK(same_predictions(base, rev));

    const MetricsReport e1 = evaluate(m, data.test, 3);
    const MetricsReport e2 = evaluate(m, data.test, 3);
    CHECK(e1.f1 == e2.f1);
    CHECK(e1.counts.tp == e2.counts.tp);
  }
}

TEST_CASE("semantic loss is reported with lambda 0 and when disabled") {
  const Corpus data = small_corpus(Task::NER);
  Model m(small_model(Task::NER, 0.0));
  std::vector<const Sample*> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(&data.train[static_cast<std::size_t>(i)]);
  for (const LossOptions opts : {LossOptions{0.0, true, false}, LossOptions{0.5, false, false}}) {
    LossBreakdown parts;
    const ag::Var loss = m.batch_loss(batch, opts, ForwardContext::eval(), &parts);
    CHECK(parts.semantic > 0.0);
    CHECK(parts.total == parts.task);
    CHECK(loss.scalar() == parts.total);
  }
  LossBreakdown with;
  m.batch_loss(batch, LossOptions{0.5, true, false}, ForwardContext::eval(), &with);
  CHECK(with.total == doctest::Approx(with.task + 0.5 * with.semantic).epsilon(1e-14));
}

TEST_CASE("without AttnMixup and dropout the training loss equals the evaluation loss") {
  for (Task task : {Task::NER, Task::RE}) {
    const Corpus data = small_corpus(task);
    Model m(small_model(task, 0.0));
    std::vector<const Sample*> batch;
    for (int i = 0; i < 5; ++i) batch.push_back(&data.train[static_cast<std::size_t>(i)]);
    const LossOptions opts{0.5, true, false};
    Rng rng(3);
    LossBreakdown train_parts, eval_parts;
    m.batch_loss(batch, opts, ForwardContext::training(rng), &train_parts);
    m.batch_loss(batch, opts, ForwardContext::eval(), &eval_parts);
    CHECK(train_parts.total == eval_parts.total);
    CHECK(train_parts.training_rows == 5);

    // With AttnMixup the batch grows to B + vicinal + mixed rows.
    LossBreakdown mixed;
    m.batch_loss(batch, LossOptions{0.5, true, true}, ForwardContext::training(rng), &mixed);
    CHECK(mixed.training_rows > 5);
  }
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("mmie_test_ckpt");
  for (Task task : {Task::NER, Task::RE}) {
    const Corpus data = small_corpus(task);
    ModelConfig cfg = small_model(task, 0.1);
    cfg.init_seed = 17;
    Model m(cfg);
    const std::string path = (dir.path / "m.ckpt").string();
    save_checkpoint(m, path);
    const auto loaded = load_model(path);
    CHECK(loaded->config().to_json() == cfg.to_json());
    CHECK(same_predictions(predict_all(m, data.test, 4), predict_all(*loaded, data.test, 4)));

    ModelConfig wider = cfg;
    wider.latent_dim = 6;
    Model other(wider);
    CHECK_THROWS_AS(load_weights(other, read_checkpoint(path)), ConfigError);
  }
  std::ofstream(dir.path / "junk.ckpt") << "not a checkpoint\n";
  CHECK_THROWS_AS(read_checkpoint((dir.path / "junk.ckpt").string()), ParseError);
  CHECK_THROWS_AS(read_checkpoint((dir.path / "missing.ckpt").string()), IoError);

  const std::vector<std::string> names{"O", "B-PER", "I-PER"};
  write_label_manifest(names, (dir.path / "tags.txt").string());
  CHECK(read_label_manifest((dir.path / "tags.txt").string()) == names);
}

TEST_CASE("run_training writes the run artifacts") {
  TempDir dir("mmie_test_run");
  const Corpus data = small_corpus(Task::RE);
  write_corpus(data.train, (dir.path / "train.jsonl").string());
  write_corpus(data.val, (dir.path / "val.jsonl").string());
  write_corpus(data.test, (dir.path / "test.jsonl").string());
  RunConfig cfg = small_run(Task::RE);
  cfg.train_path = (dir.path / "train.jsonl").string();
  cfg.val_path = (dir.path / "val.jsonl").string();
  cfg.test_path = (dir.path / "test.jsonl").string();

  int calls = 0;
  const RunOutputs out = run_training(cfg, (dir.path / "out").string(), [&](const EpochLog&) { ++calls; });
  CHECK(calls == 2);
  const fs::path base = dir.path / "out" / cfg.stem();
  CHECK(fs::exists(base.string() + ".ckpt"));
  CHECK(fs::exists(base.string() + ".relations.txt"));
  std::ifstream log(base.string() + ".epochs.log");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    CHECK(line.rfind("epoch=" + std::to_string(++lines) + " loss=", 0) == 0);
  }
  CHECK(lines == 2);

  const auto report = nlohmann::json::parse(std::ifstream(out.report_path));
  for (const char* key : {"precision", "recall", "f1", "per_type", "best_epoch", "config"})
    CHECK(report.contains(key));
  CHECK(report["task"] == "RE");

  // The stored checkpoint reproduces the reported test metrics.
  const auto model = load_model(out.checkpoint_path);
  CHECK(evaluate(*model, data.test, 5).f1 == out.test.f1);

  RunConfig wrong = cfg;
  wrong.model = small_model(Task::NER, 0.1);
  CHECK_THROWS_AS(run_training(wrong, (dir.path / "bad").string()), ConfigError);
}
