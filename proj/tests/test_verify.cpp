// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "errors.hpp"
#include "json.hpp"
#include "verify.hpp"

using namespace mmie;

TEST_CASE("suite registry") {
  CHECK(verification_suites() == std::vector<std::string>{"crf-oracle", "grad-check", "kl-mc", "attn-props"});
  CHECK_THROWS_AS(run_suite("no-such-suite"), ConfigError);
}

TEST_CASE("fast suites pass and report their worst case") {
  for (const char* name : {"crf-oracle", "grad-check", "attn-props"}) {
    const SuiteReport r = run_suite(name, 3);
    CHECK_MESSAGE(r.passed(), r.to_json());
    const auto j = nlohmann::json::parse(r.to_json());
    CHECK(j["suite"] == name);
    CHECK(j["seed"] == 3);
    for (const auto& check : j["checks"]) {
      CHECK(check["passed"] == true);
      CHECK(check.contains("worst_case"));
      CHECK(check["worst"].get<double>() <= check["tolerance"].get<double>());
    }
  }
}

TEST_CASE("suites are reproducible for a seed") {
  const SuiteReport a = run_suite("crf-oracle", 5);
  const SuiteReport b = run_suite("crf-oracle", 5);
  REQUIRE(a.checks.size() == b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    CHECK(a.checks[i].worst == b.checks[i].worst);
    CHECK(a.checks[i].worst_case == b.checks[i].worst_case);
  }
}
