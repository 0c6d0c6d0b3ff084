// Copyright 2026 The MMIE Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MMIE_CONTEXT_HPP
#define MMIE_CONTEXT_HPP

#include "rng.hpp"

namespace mmie {

// Mode and randomness for one forward pass. In eval mode no random numbers
// are drawn, so `rng` may be null.
struct ForwardContext {
  bool train = false;
  Rng* rng = nullptr;

  static ForwardContext eval() { return {}; }
  static ForwardContext training(Rng& r) { return {true, &r}; }
};

}  // namespace mmie

#endif  // MMIE_CONTEXT_HPP
