// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmie/mmie.h"

namespace fs = std::filesystem;

namespace {

// Takes ownership of a library-allocated string.
std::string take(char* s) {
  std::string out = s ? s : "";
  mmie_string_free(s);
  return out;
}

const char* kSmallConfig =
    "# small run\n"
    "task=NER\n"
    "vocab_size=40\nnum_entity_types=2\nnum_train=16\nnum_val=6\nnum_test=6\n"
    "min_tokens=5\nmax_tokens=7\nimage_size=8\nobject_size=4\n"
    "d_model=8\nnum_layers=2\ntext_heads=2\nffn_dim=16\nimage_channels=4,6\npooled_dim=8\n"
    "attn_heads=2\nlatent_dim=4\nepochs=2\nbatch_size=4\n";

void on_epoch(const char* line, void* user) { static_cast<std::vector<std::string>*>(user)->push_back(line); }

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(mmie_version()).size() > 0);
  CHECK(std::string(mmie_status_name(MMIE_OK)) == "ok");
  CHECK(std::string(mmie_status_name(MMIE_ERR_VERIFICATION)).size() > 0);
}

TEST_CASE("null arguments are rejected with a message") {
  CHECK(mmie_config_new(nullptr) == MMIE_ERR_INVALID_ARGUMENT);
  CHECK(std::string(mmie_last_error()).size() > 0);
  CHECK(mmie_corpus_size(nullptr, "train", nullptr) == MMIE_ERR_INVALID_ARGUMENT);
  CHECK(mmie_train(nullptr, "x", nullptr, nullptr, nullptr) == MMIE_ERR_INVALID_ARGUMENT);
  CHECK(mmie_verify(nullptr, 1, nullptr) == MMIE_ERR_INVALID_ARGUMENT);
  mmie_config_free(nullptr);
  mmie_corpus_free(nullptr);
  mmie_string_free(nullptr);
}

TEST_CASE("configuration handles") {
  mmie_config* cfg = nullptr;
  REQUIRE(mmie_config_parse("task=RE\nseed=4\n", &cfg) == MMIE_OK);
  char* value = nullptr;
  REQUIRE(mmie_config_get(cfg, "seed", &value) == MMIE_OK);
  CHECK(take(value) == "4");
  CHECK(mmie_config_set(cfg, "seed", "5") == MMIE_OK);
  REQUIRE(mmie_config_get(cfg, "seed", &value) == MMIE_OK);
  CHECK(take(value) == "5");
  CHECK(mmie_config_get(cfg, "absent", &value) == MMIE_ERR_CONFIG);
  CHECK(std::string(mmie_last_error()).find("absent") != std::string::npos);
  mmie_config_free(cfg);

  CHECK(mmie_config_load("/nonexistent/run.cfg", &cfg) == MMIE_ERR_IO);
}

TEST_CASE("corpus generation, save and load") {
  const fs::path dir = fs::temp_directory_path() / "mmie_capi_corpus";
  fs::remove_all(dir);
  mmie_config* cfg = nullptr;
  REQUIRE(mmie_config_parse(kSmallConfig, &cfg) == MMIE_OK);
  mmie_corpus* corpus = nullptr;
  REQUIRE(mmie_corpus_generate(cfg, &corpus) == MMIE_OK);
  std::size_t n = 0;
  REQUIRE(mmie_corpus_size(corpus, "train", &n) == MMIE_OK);
  CHECK(n == 16);
  CHECK(mmie_corpus_size(corpus, "dev", &n) == MMIE_ERR_INVALID_ARGUMENT);
  REQUIRE(mmie_corpus_save(corpus, dir.string().c_str()) == MMIE_OK);

  mmie_corpus* loaded = nullptr;
  REQUIRE(mmie_corpus_load(dir.string().c_str(), &loaded) == MMIE_OK);
  REQUIRE(mmie_corpus_size(loaded, "test", &n) == MMIE_OK);
  CHECK(n == 6);
  CHECK(mmie_corpus_load((dir / "missing").string().c_str(), &loaded) == MMIE_ERR_IO);

  mmie_config_set(cfg, "num_train", "0");
  mmie_corpus* bad = nullptr;
  CHECK(mmie_corpus_generate(cfg, &bad) == MMIE_ERR_CONFIG);
  mmie_corpus_free(corpus);
  mmie_corpus_free(loaded);
  mmie_config_free(cfg);
  fs::remove_all(dir);
}

TEST_CASE("train, evaluate and score through the C interface") {
  const fs::path dir = fs::temp_directory_path() / "mmie_capi_train";
  fs::remove_all(dir);
  mmie_config* cfg = nullptr;
  REQUIRE(mmie_config_parse(kSmallConfig, &cfg) == MMIE_OK);
  mmie_corpus* corpus = nullptr;
  REQUIRE(mmie_corpus_generate(cfg, &corpus) == MMIE_OK);
  REQUIRE(mmie_corpus_save(corpus, (dir / "data").string().c_str()) == MMIE_OK);
  mmie_corpus_free(corpus);
  mmie_config_set(cfg, "data_dir", (dir / "data").string().c_str());

  std::vector<std::string> lines;
  char* summary = nullptr;
  REQUIRE_MESSAGE(mmie_train(cfg, (dir / "run").string().c_str(), on_epoch, &lines, &summary) == MMIE_OK,
                  mmie_last_error());
  CHECK(lines.size() == 2);
  CHECK(lines[0].rfind("epoch=1 ", 0) == 0);
  const auto s = nlohmann::json::parse(take(summary));
  const std::string ckpt = s["checkpoint"];
  CHECK(fs::exists(ckpt));
  const double test_f1 = s["metrics"]["f1"];

  const std::string test_path = (dir / "data" / "test.jsonl").string();
  const std::string pred_path = (dir / "pred.jsonl").string();
  char* report = nullptr;
  REQUIRE(mmie_evaluate(ckpt.c_str(), test_path.c_str(), 3, pred_path.c_str(), &report) == MMIE_OK);
  CHECK(nlohmann::json::parse(take(report))["f1"] == test_f1);

  REQUIRE(mmie_score_files(test_path.c_str(), pred_path.c_str(), 2, &report) == MMIE_OK);
  CHECK(nlohmann::json::parse(take(report))["f1"] == test_f1);
  REQUIRE(mmie_score_files(test_path.c_str(), test_path.c_str(), 0, &report) == MMIE_OK);
  CHECK(nlohmann::json::parse(take(report))["f1"] == 1.0);

  CHECK(mmie_evaluate(test_path.c_str(), test_path.c_str(), 3, nullptr, &report) == MMIE_ERR_PARSE);
  CHECK(mmie_evaluate(ckpt.c_str(), test_path.c_str(), 0, nullptr, &report) == MMIE_ERR_INVALID_ARGUMENT);
  mmie_config_free(cfg);
  fs::remove_all(dir);
}

TEST_CASE("verification through the C interface") {
  char* report = nullptr;
  REQUIRE(mmie_verify("crf-oracle", 2, &report) == MMIE_OK);
  const auto j = nlohmann::json::parse(take(report));
  CHECK(j["passed"] == true);
  CHECK(mmie_verify("bogus", 2, &report) == MMIE_ERR_CONFIG);
}
