// cidnst/augment.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/augment.hpp"

#include <algorithm>
#include <utility>

#include "cidnst/common.hpp"

namespace cidnst {

void AugmentConfig::Validate() const {
  if (n_freq_masks < 0 || n_time_masks < 0) {
    Fail(ErrorKind::kConfig, "augment: mask counts must be >= 0");
  }
  if (max_freq_width < 0 || max_time_width < 0) {
    Fail(ErrorKind::kConfig, "augment: mask widths must be >= 0");
  }
}

Tensor SpecAugment(const Tensor& x, const AugmentConfig& cfg, uint64_t seed) {
  cfg.Validate();
  if (x.Rank() != 2) {
    Fail(ErrorKind::kShape, "augment: want [T, F], got " + x.ShapeStr());
  }
  if (x.Dim(0) < 1 || x.Dim(1) < 1) {
    Fail(ErrorKind::kEmptyBatch, "augment: empty features");
  }
  if (!cfg.enabled) return x;

  int t_axis = x.Dim(0), f_axis = x.Dim(1);
  double mean = 0.0;
  for (double v : x.Vec()) mean += v;
  mean /= static_cast<double>(x.Numel());

  Tensor out = x;
  Rng rng(seed);
  // Draw order is part of the determinism contract: frequency masks first,
  // then time masks, width before start.
  auto draw = [&rng](int max_width, int axis) {
    int w = static_cast<int>(rng.UniformInt(
        static_cast<uint64_t>(std::min(max_width, axis - 1)) + 1));
    int start = static_cast<int>(rng.UniformInt(
        static_cast<uint64_t>(axis - w) + 1));
    return std::pair<int, int>(start, w);
  };
  for (int i = 0; i < cfg.n_freq_masks; i++) {
    auto [f0, w] = draw(cfg.max_freq_width, f_axis);
    for (int t = 0; t < t_axis; t++) {
      for (int f = f0; f < f0 + w; f++) out.At(t, f) = mean;
    }
  }
  for (int i = 0; i < cfg.n_time_masks; i++) {
    auto [t0, w] = draw(cfg.max_time_width, t_axis);
    for (int t = t0; t < t0 + w; t++) {
      for (int f = 0; f < f_axis; f++) out.At(t, f) = mean;
    }
  }
  return out;
}

}  // namespace cidnst
