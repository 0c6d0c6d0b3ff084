// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

// Property suites run from the command line:
//   crf-oracle  forward algorithm and Viterbi against exhaustive enumeration
//   grad-check  reverse-mode gradients of the full training loss against
//               central differences
//   kl-mc       closed-form Gaussian KL against Monte-Carlo estimates
//   attn-props  structural properties of the AttnMixup pipeline

#ifndef MMIE_VERIFY_HPP
#define MMIE_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace mmie {

struct CheckResult {
  std::string name;
  std::string metric;
  double worst = 0.0;
  double tolerance = 0.0;
  long long cases = 0;
  bool passed = true;
  // JSON object describing the worst case, including what is needed to replay it.
  std::string worst_case = "{}";
};

struct SuiteReport {
  std::string suite;
  std::uint64_t seed = 0;
  double seconds = 0.0;
  std::vector<CheckResult> checks;

  bool passed() const;
  std::string to_json(int indent = 2) const;
};

const std::vector<std::string>& verification_suites();

// Throws ConfigError for an unknown suite name.
SuiteReport run_suite(const std::string& suite, std::uint64_t seed = 1);

}  // namespace mmie

#endif  // MMIE_VERIFY_HPP
