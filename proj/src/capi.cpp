// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmie/mmie.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "checkpoint.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "json.hpp"
#include "synthgen.hpp"
#include "trainer.hpp"
#include "verify.hpp"

struct mmie_config {
  mmie::KeyValueConfig values;
};

struct mmie_corpus {
  mmie::Corpus corpus;
};

namespace {

thread_local std::string g_last_error;

mmie_status fail(mmie_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Maps library exceptions onto status codes.
template <typename Fn>
mmie_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const mmie::ParseError& e) {
    return fail(MMIE_ERR_PARSE, e.what());
  } catch (const mmie::ConfigError& e) {
    return fail(MMIE_ERR_CONFIG, e.what());
  } catch (const mmie::IoError& e) {
    return fail(MMIE_ERR_IO, e.what());
  } catch (const mmie::ShapeError& e) {
    return fail(MMIE_ERR_SHAPE, e.what());
  } catch (const mmie::NumericError& e) {
    return fail(MMIE_ERR_NUMERIC, e.what());
  } catch (const mmie::VerificationError& e) {
    return fail(MMIE_ERR_VERIFICATION, e.what());
  } catch (const std::exception& e) {
    return fail(MMIE_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MMIE_ERR_INTERNAL, "unknown exception");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_out(char** out, const std::string& s) {
  if (out) *out = copy_string(s);
}

mmie::EpochCallback forward_epochs(mmie_epoch_callback cb, void* user) {
  if (!cb) return {};
  return [cb, user](const mmie::EpochLog& e) { cb(e.to_line().c_str(), user); };
}

const std::vector<mmie::Sample>* split_of(const mmie_corpus* c, const std::string& name) {
  if (name == "train") return &c->corpus.train;
  if (name == "val") return &c->corpus.val;
  if (name == "test") return &c->corpus.test;
  return nullptr;
}

int infer_label_count(mmie::Task task, const std::vector<mmie::Sample>& a, const std::vector<mmie::Sample>& b) {
  int top = 0;
  for (const auto* set : {&a, &b})
    for (const auto& s : *set) {
      if (task == mmie::Task::NER)
        for (int t : s.ner_labels) top = std::max(top, t);
      else
        top = std::max(top, s.relation);
    }
  return task == mmie::Task::NER ? std::max(1, (top + 1) / 2) : std::max(2, top + 1);
}

nlohmann::ordered_json run_summary(const mmie::RunOutputs& out) {
  nlohmann::ordered_json j;
  j["checkpoint"] = out.checkpoint_path;
  j["report"] = out.report_path;
  j["log"] = out.log_path;
  j["metrics"] = nlohmann::ordered_json::parse(out.report_json);
  return j;
}

}  // namespace

extern "C" {

const char* mmie_version(void) { return "1.0.0"; }

const char* mmie_status_name(mmie_status status) {
  switch (status) {
    case MMIE_OK: return "ok";
    case MMIE_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MMIE_ERR_CONFIG: return "config error";
    case MMIE_ERR_IO: return "i/o error";
    case MMIE_ERR_PARSE: return "parse error";
    case MMIE_ERR_SHAPE: return "shape error";
    case MMIE_ERR_NUMERIC: return "numeric error";
    case MMIE_ERR_VERIFICATION: return "verification failure";
    case MMIE_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* mmie_last_error(void) { return g_last_error.c_str(); }

void mmie_string_free(char* s) { std::free(s); }

mmie_status mmie_config_new(mmie_config** out) {
  if (!out) return fail(MMIE_ERR_INVALID_ARGUMENT, "out is null");
  return guarded([&] {
    *out = new mmie_config();
    return MMIE_OK;
  });
}

mmie_status mmie_config_load(const char* path, mmie_config** out) {
  if (!path || !out) return fail(MMIE_ERR_INVALID_ARGUMENT, "path and out must be non-null");
  return guarded([&] {
    *out = new mmie_config{mmie::KeyValueConfig::load(path)};
    return MMIE_OK;
  });
}

mmie_status mmie_config_parse(const char* text, mmie_config** out) {
  if (!text || !out) return fail(MMIE_ERR_INVALID_ARGUMENT, "text and out must be non-null");
  return guarded([&] {
    *out = new mmie_config{mmie::KeyValueConfig::parse(text)};
    return MMIE_OK;
  });
}

mmie_status mmie_config_set(mmie_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return fail(MMIE_ERR_INVALID_ARGUMENT, "cfg, key and value must be non-null");
  return guarded([&] {
    if (*key == '\0') throw mmie::ConfigError("empty config key");
    cfg->values.set(key, value);
    return MMIE_OK;
  });
}

mmie_status mmie_config_get(const mmie_config* cfg, const char* key, char** out) {
  if (!cfg || !key || !out) return fail(MMIE_ERR_INVALID_ARGUMENT, "cfg, key and out must be non-null");
  return guarded([&] {
    const auto v = cfg->values.get(key);
    if (!v) throw mmie::ConfigError(std::string("missing config key: ") + key);
    *out = copy_string(*v);
    return MMIE_OK;
  });
}

void mmie_config_free(mmie_config* cfg) { delete cfg; }

mmie_status mmie_corpus_generate(const mmie_config* cfg, mmie_corpus** out) {
  if (!cfg || !out) return fail(MMIE_ERR_INVALID_ARGUMENT, "cfg and out must be non-null");
  return guarded([&] {
    *out = new mmie_corpus{mmie::generate_corpus(mmie::CorpusSpec::from_config(cfg->values))};
    return MMIE_OK;
  });
}

mmie_status mmie_corpus_load(const char* dir, mmie_corpus** out) {
  if (!dir || !out) return fail(MMIE_ERR_INVALID_ARGUMENT, "dir and out must be non-null");
  return guarded([&] {
    const std::filesystem::path d(dir);
    auto c = std::make_unique<mmie_corpus>();
    c->corpus.train = mmie::read_corpus((d / "train.jsonl").string());
    c->corpus.val = mmie::read_corpus((d / "val.jsonl").string());
    c->corpus.test = mmie::read_corpus((d / "test.jsonl").string());
    *out = c.release();
    return MMIE_OK;
  });
}

mmie_status mmie_corpus_save(const mmie_corpus* corpus, const char* dir) {
  if (!corpus || !dir) return fail(MMIE_ERR_INVALID_ARGUMENT, "corpus and dir must be non-null");
  return guarded([&] {
    const std::filesystem::path d(dir);
    std::filesystem::create_directories(d);
    mmie::write_corpus(corpus->corpus.train, (d / "train.jsonl").string());
    mmie::write_corpus(corpus->corpus.val, (d / "val.jsonl").string());
    mmie::write_corpus(corpus->corpus.test, (d / "test.jsonl").string());
    return MMIE_OK;
  });
}

mmie_status mmie_corpus_size(const mmie_corpus* corpus, const char* split, size_t* out) {
  if (!corpus || !split || !out) return fail(MMIE_ERR_INVALID_ARGUMENT, "arguments must be non-null");
  const auto* s = split_of(corpus, split);
  if (!s) return fail(MMIE_ERR_INVALID_ARGUMENT, std::string("unknown split: ") + split);
  *out = s->size();
  return MMIE_OK;
}

void mmie_corpus_free(mmie_corpus* corpus) { delete corpus; }

mmie_status mmie_train(const mmie_config* cfg, const char* out_dir, mmie_epoch_callback on_epoch,
                       void* user_data, char** summary_json) {
  if (!cfg || !out_dir) return fail(MMIE_ERR_INVALID_ARGUMENT, "cfg and out_dir must be non-null");
  return guarded([&] {
    const auto run = mmie::RunConfig::from_config(cfg->values);
    const auto out = mmie::run_training(run, out_dir, forward_epochs(on_epoch, user_data));
    set_out(summary_json, run_summary(out).dump(2));
    return MMIE_OK;
  });
}

mmie_status mmie_evaluate(const char* checkpoint_path, const char* data_path, int batch_size,
                          const char* predictions_path, char** report_json) {
  if (!checkpoint_path || !data_path) return fail(MMIE_ERR_INVALID_ARGUMENT, "paths must be non-null");
  if (batch_size < 1) return fail(MMIE_ERR_INVALID_ARGUMENT, "batch_size must be >= 1");
  return guarded([&] {
    const auto model = mmie::load_model(checkpoint_path);
    const auto data = mmie::read_corpus(data_path);
    for (const auto& s : data)
      if (s.task != model->config().task)
        throw mmie::ConfigError("checkpoint/config mismatch: checkpoint is " +
                                mmie::task_name(model->config().task) + ", sample " + s.id + " is " +
                                mmie::task_name(s.task));
    const auto pred = mmie::predict_all(*model, data, batch_size);
    const auto report = mmie::score(model->config(), data, pred);
    if (predictions_path) mmie::write_corpus(mmie::with_predictions(data, pred), predictions_path);
    set_out(report_json, report.to_json());
    return MMIE_OK;
  });
}

mmie_status mmie_score_files(const char* gold_path, const char* pred_path, int num_labels, char** report_json) {
  if (!gold_path || !pred_path) return fail(MMIE_ERR_INVALID_ARGUMENT, "paths must be non-null");
  if (num_labels < 0) return fail(MMIE_ERR_INVALID_ARGUMENT, "num_labels must be >= 0");
  return guarded([&] {
    const auto gold = mmie::read_corpus(gold_path);
    const auto pred = mmie::read_corpus(pred_path);
    if (gold.empty()) throw mmie::ConfigError("gold file is empty");
    const mmie::Task task = gold.front().task;
    for (const auto* set : {&gold, &pred})
      for (const auto& s : *set)
        if (s.task != task) throw mmie::ConfigError("mixed tasks in " + s.id);
    const int n = num_labels > 0 ? num_labels : infer_label_count(task, gold, pred);
    set_out(report_json, mmie::score_corpora(task, n, gold, pred).to_json());
    return MMIE_OK;
  });
}

mmie_status mmie_verify(const char* suite, uint64_t seed, char** report_json) {
  if (!suite) return fail(MMIE_ERR_INVALID_ARGUMENT, "suite must be non-null");
  return guarded([&] {
    std::vector<std::string> names;
    if (std::string(suite) == "all")
      names = mmie::verification_suites();
    else
      names.push_back(suite);
    nlohmann::ordered_json reports = nlohmann::ordered_json::array();
    bool passed = true;
    std::string failures;
    for (const auto& name : names) {
      const auto r = mmie::run_suite(name, seed);
      reports.push_back(nlohmann::ordered_json::parse(r.to_json()));
      if (!r.passed()) {
        passed = false;
        failures += (failures.empty() ? "" : ", ") + name;
      }
    }
    const auto& doc = names.size() == 1 ? reports.front() : reports;
    set_out(report_json, doc.dump(2));
    if (!passed) return fail(MMIE_ERR_VERIFICATION, "verification failed: " + failures);
    return MMIE_OK;
  });
}

mmie_status mmie_ablate(const mmie_config* cfg, const char* out_dir, mmie_epoch_callback on_epoch,
                        void* user_data, char** summary_json) {
  if (!cfg || !out_dir) return fail(MMIE_ERR_INVALID_ARGUMENT, "cfg and out_dir must be non-null");
  return guarded([&] {
    const auto base = mmie::RunConfig::from_config(cfg->values);
    struct Row {
      const char* name;
      bool no_sem;
      bool no_mix;
    };
    const Row rows[] = {{"full", false, false}, {"no_semantic_loss", true, false}, {"no_attnmixup", false, true}};
    nlohmann::ordered_json summary;
    summary["seed"] = base.seed;
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const Row& row : rows) {
      auto run = base;
      run.no_semantic_loss = row.no_sem;
      run.no_attnmixup = row.no_mix;
      const auto out = mmie::run_training(run, out_dir, forward_epochs(on_epoch, user_data));
      auto j = run_summary(out);
      j["variant"] = row.name;
      runs.push_back(std::move(j));
    }
    summary["runs"] = std::move(runs);
    const std::string text = summary.dump(2);
    const auto path = std::filesystem::path(out_dir) / ("ablation-s" + std::to_string(base.seed) + ".json");
    std::ofstream f(path);
    if (!f || !(f << text << '\n')) throw mmie::IoError("cannot write " + path.string());
    set_out(summary_json, text);
    return MMIE_OK;
  });
}

}  // extern "C"
