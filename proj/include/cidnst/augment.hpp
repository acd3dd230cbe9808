// cidnst/augment.hpp  Feature masking applied during supervised and student
// training. Frequency masks blank column bands, time masks blank row bands;
// masked cells take the per-utterance mean so feature statistics stay stable.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_AUGMENT_HPP_
#define CIDNST_AUGMENT_HPP_

#include <cstdint>

#include "cidnst/tensor.hpp"

namespace cidnst {

struct AugmentConfig {
  int n_freq_masks = 1;
  int max_freq_width = 4;
  int n_time_masks = 1;
  int max_time_width = 8;
  bool enabled = true;

  void Validate() const;  // counts and widths must be >= 0
};

// Masks x ([T, F], nonempty) in place on a copy: for each mask a uniform
// width in [0, max] (clamped below the axis size) and a uniform fitting
// start. Deterministic given the seed; disabled config returns x unchanged.
Tensor SpecAugment(const Tensor& x, const AugmentConfig& cfg, uint64_t seed);

}  // namespace cidnst

#endif  // CIDNST_AUGMENT_HPP_
