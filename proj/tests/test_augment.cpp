// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>

#include "cidnst/augment.hpp"
#include "cidnst/common.hpp"
#include "doctest.h"

using namespace cidnst;

namespace {

Tensor RandomFeatures(int t, int f, uint64_t seed) {
  Rng rng(seed);
  Tensor x({t, f});
  for (double& v : x.Vec()) v = rng.Normal();
  return x;
}

int ChangedCells(const Tensor& a, const Tensor& b) {
  int n = 0;
  for (size_t i = 0; i < a.Numel(); i++) n += a.At(i) != b.At(i);
  return n;
}

}  // namespace

TEST_CASE("disabled augmentation is the identity") {
  Tensor x = RandomFeatures(20, 8, 1);
  AugmentConfig cfg;
  cfg.enabled = false;
  Tensor y = SpecAugment(x, cfg, 7);
  CHECK(ChangedCells(x, y) == 0);
}

TEST_CASE("zero-width masks leave the input identical") {
  Tensor x = RandomFeatures(20, 8, 2);
  AugmentConfig cfg;
  cfg.max_freq_width = 0;
  cfg.max_time_width = 0;
  CHECK(ChangedCells(x, SpecAugment(x, cfg, 9)) == 0);
}

TEST_CASE("masked cell count stays within the width bound over seeds") {
  Tensor x = RandomFeatures(24, 10, 3);
  AugmentConfig cfg;
  cfg.n_freq_masks = 2;
  cfg.max_freq_width = 3;
  cfg.n_time_masks = 1;
  cfg.max_time_width = 5;
  int bound = cfg.n_freq_masks * cfg.max_freq_width * x.Dim(0) +
              cfg.n_time_masks * cfg.max_time_width * x.Dim(1);
  bool any_masked = false;
  for (uint64_t seed = 0; seed < 100; seed++) {
    Tensor y = SpecAugment(x, cfg, seed);
    int changed = ChangedCells(x, y);
    CHECK(changed <= bound);
    any_masked = any_masked || changed > 0;
    // Every changed cell holds the per-utterance mean.
    double mean = 0.0;
    for (double v : x.Vec()) mean += v;
    mean /= static_cast<double>(x.Numel());
    for (size_t i = 0; i < x.Numel(); i++) {
      if (y.At(i) != x.At(i)) CHECK(y.At(i) == mean);
    }
  }
  CHECK(any_masked);
}

TEST_CASE("same seed places the same masks") {
  Tensor x = RandomFeatures(16, 6, 4);
  AugmentConfig cfg;
  for (uint64_t seed : {0ull, 5ull, 123456789ull}) {
    Tensor a = SpecAugment(x, cfg, seed);
    Tensor b = SpecAugment(x, cfg, seed);
    CHECK(ChangedCells(a, b) == 0);
  }
}

TEST_CASE("masks never exceed the axis even on tiny inputs") {
  Tensor x = RandomFeatures(2, 2, 5);
  AugmentConfig cfg;
  cfg.max_freq_width = 100;
  cfg.max_time_width = 100;
  for (uint64_t seed = 0; seed < 20; seed++) {
    Tensor y = SpecAugment(x, cfg, seed);
    // Width clamps below the axis size, so something always survives.
    CHECK(ChangedCells(x, y) < static_cast<int>(x.Numel()));
  }
}

TEST_CASE("augment rejects malformed inputs") {
  AugmentConfig cfg;
  bool threw = false;
  try {
    SpecAugment(Tensor({0, 4}), cfg, 1);
  } catch (const Error& e) {
    threw = e.kind() == ErrorKind::kEmptyBatch;
  }
  CHECK(threw);
  cfg.n_freq_masks = -1;
  threw = false;
  try {
    SpecAugment(RandomFeatures(4, 4, 6), cfg, 1);
  } catch (const Error& e) {
    threw = e.kind() == ErrorKind::kConfig;
  }
  CHECK(threw);
}
