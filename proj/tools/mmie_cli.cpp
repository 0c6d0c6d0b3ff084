// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver. Exit codes: 0 success, 1 configuration or runtime
// error, 2 verification failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmie/mmie.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitVerification = 2;

struct Options {
  std::string task;
  std::string config_path;
  std::string seed;
  std::string seeds;
  bool no_semantic_loss = false;
  bool no_attnmixup = false;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string pred;
  std::string suite = "all";
  int batch_size = 8;
  int num_labels = 0;
};

class Config {
 public:
  Config() = default;
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  ~Config() { mmie_config_free(cfg_); }
  mmie_config** out() { return &cfg_; }
  mmie_config* get() const { return cfg_; }

 private:
  mmie_config* cfg_ = nullptr;
};

class OwnedString {
 public:
  OwnedString() = default;
  OwnedString(const OwnedString&) = delete;
  OwnedString& operator=(const OwnedString&) = delete;
  ~OwnedString() { mmie_string_free(s_); }
  char** out() { return &s_; }
  std::string str() const { return s_ ? s_ : ""; }

 private:
  char* s_ = nullptr;
};

int report_failure(mmie_status status) {
  std::cerr << "error (" << mmie_status_name(status) << "): " << mmie_last_error() << '\n';
  return status == MMIE_ERR_VERIFICATION ? kExitVerification : kExitError;
}

bool write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path);
  f << text << '\n';
  return static_cast<bool>(f);
}

// Loads --config (if any) and applies the command-line overrides.
mmie_status build_config(const Options& o, Config& cfg) {
  mmie_status st = o.config_path.empty() ? mmie_config_new(cfg.out()) : mmie_config_load(o.config_path.c_str(), cfg.out());
  if (st != MMIE_OK) return st;
  auto set = [&](const char* key, const std::string& value) {
    return st == MMIE_OK ? (st = mmie_config_set(cfg.get(), key, value.c_str())) : st;
  };
  if (!o.task.empty()) set("task", o.task);
  if (!o.seed.empty()) set("seed", o.seed);
  if (o.no_semantic_loss) set("no_semantic_loss", "true");
  if (o.no_attnmixup) set("no_attnmixup", "true");
  if (!o.data.empty()) set("data_dir", o.data);
  return st;
}

std::vector<std::string> seed_list(const Options& o) {
  std::vector<std::string> out;
  std::stringstream ss(o.seeds);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_epoch(const char* line, void*) {
  std::cerr << line << '\n';
}

int cmd_gen_data(const Options& o) {
  Config cfg;
  if (mmie_status st = build_config(o, cfg); st != MMIE_OK) return report_failure(st);
  mmie_corpus* corpus = nullptr;
  if (mmie_status st = mmie_corpus_generate(cfg.get(), &corpus); st != MMIE_OK) return report_failure(st);
  const std::string dir = o.out.empty() ? "data" : o.out;
  const mmie_status st = mmie_corpus_save(corpus, dir.c_str());
  std::size_t sizes[3] = {0, 0, 0};
  const char* splits[3] = {"train", "val", "test"};
  for (int i = 0; i < 3 && st == MMIE_OK; ++i) mmie_corpus_size(corpus, splits[i], &sizes[i]);
  mmie_corpus_free(corpus);
  if (st != MMIE_OK) return report_failure(st);
  std::cout << "wrote " << sizes[0] << "/" << sizes[1] << "/" << sizes[2] << " samples to " << dir << '\n';
  return kExitOk;
}

using RunFn = mmie_status (*)(const mmie_config*, const char*, mmie_epoch_callback, void*, char**);

// train and ablate share everything except the library entry point.
int cmd_run(const Options& o, RunFn run) {
  std::vector<std::string> seeds = seed_list(o);
  if (seeds.empty()) seeds.push_back(o.seed);
  const std::string dir = o.out.empty() ? "runs" : o.out;
  for (const std::string& seed : seeds) {
    Options one = o;
    one.seed = seed;
    Config cfg;
    if (mmie_status st = build_config(one, cfg); st != MMIE_OK) return report_failure(st);
    OwnedString summary;
    if (mmie_status st = run(cfg.get(), dir.c_str(), print_epoch, nullptr, summary.out()); st != MMIE_OK)
      return report_failure(st);
    std::cout << summary.str() << '\n';
  }
  return kExitOk;
}

int cmd_eval(const Options& o) {
  if (o.data.empty()) {
    std::cerr << "error: eval needs --data <corpus file>\n";
    return kExitError;
  }
  OwnedString report;
  mmie_status st;
  if (!o.checkpoint.empty()) {
    st = mmie_evaluate(o.checkpoint.c_str(), o.data.c_str(), o.batch_size, o.pred.empty() ? nullptr : o.pred.c_str(),
                       report.out());
  } else if (!o.pred.empty()) {
    st = mmie_score_files(o.data.c_str(), o.pred.c_str(), o.num_labels, report.out());
  } else {
    std::cerr << "error: eval needs --checkpoint, or --pred with a prediction file to score\n";
    return kExitError;
  }
  if (st != MMIE_OK) return report_failure(st);
  if (!o.out.empty() && !write_text(o.out, report.str())) {
    std::cerr << "error: cannot write " << o.out << '\n';
    return kExitError;
  }
  std::cout << report.str() << '\n';
  return kExitOk;
}

int cmd_verify(const Options& o) {
  std::uint64_t seed = 1;
  if (!o.seed.empty()) {
    try {
      seed = std::stoull(o.seed);
    } catch (const std::exception&) {
      std::cerr << "error: --seed must be a non-negative integer\n";
      return kExitError;
    }
  }
  OwnedString report;
  const mmie_status st = mmie_verify(o.suite.c_str(), seed, report.out());
  if (!report.str().empty()) {
    std::cout << report.str() << '\n';
    if (!o.out.empty() && !write_text(o.out, report.str())) {
      std::cerr << "error: cannot write " << o.out << '\n';
      return kExitError;
    }
  }
  return st == MMIE_OK ? kExitOk : report_failure(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal information extraction: data generation, training, evaluation and checks"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--task", o.task, "NER or RE")->check(CLI::IsMember({"NER", "RE", "ner", "re"}));
    sub->add_option("--config", o.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "random seed");
    sub->add_option("--out", o.out, "output directory");
  };
  auto add_run = [&](CLI::App* sub) {
    add_common(sub);
    sub->add_option("--seeds", o.seeds, "comma-separated seeds; one run per seed");
    sub->add_option("--data", o.data, "directory holding train.jsonl, val.jsonl and test.jsonl");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  add_common(gen);

  CLI::App* train = app.add_subcommand("train", "train a model and evaluate the selected checkpoint");
  add_run(train);
  train->add_flag("--no-semantic-loss", o.no_semantic_loss, "drop the semantic alignment loss");
  train->add_flag("--no-attnmixup", o.no_attnmixup, "train without inter-sample augmentation");

  CLI::App* ablate = app.add_subcommand("ablate", "full model, without semantic loss, without AttnMixup");
  add_run(ablate);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint or score a prediction file");
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint file")->check(CLI::ExistingFile);
  eval->add_option("--data", o.data, "gold corpus file")->check(CLI::ExistingFile);
  eval->add_option("--pred", o.pred,
                   "with --checkpoint: where to write predictions; otherwise a prediction file to score");
  eval->add_option("--out", o.out, "write the metrics report to this file");
  eval->add_option("--batch-size", o.batch_size, "evaluation batch size")->check(CLI::PositiveNumber);
  eval->add_option("--num-labels", o.num_labels, "entity types (NER) or relations (RE) when scoring files");

  CLI::App* verify = app.add_subcommand("verify", "run numerical property suites");
  verify->add_option("--suite", o.suite, "crf-oracle, grad-check, kl-mc, attn-props or all")
      ->check(CLI::IsMember({"crf-oracle", "grad-check", "kl-mc", "attn-props", "all"}));
  verify->add_option("--seed", o.seed, "random seed");
  verify->add_option("--out", o.out, "write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }
  for (char& c : o.task) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));

  if (*gen) return cmd_gen_data(o);
  if (*train) return cmd_run(o, mmie_train);
  if (*ablate) return cmd_run(o, mmie_ablate);
  if (*eval) return cmd_eval(o);
  if (*verify) return cmd_verify(o);
  return kExitError;
}
