// cidnst/schedules.hpp  Supervised-ratio decay and automatic
// speech-to-text-ratio policies over the grid beta in {0.0, 0.1, ..., 1.0}.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_SCHEDULES_HPP_
#define CIDNST_SCHEDULES_HPP_

#include <string>

#include "cidnst/common.hpp"

namespace cidnst {

struct AlphaSchedule {
  enum class Mode { kFixed, kDecay };
  Mode mode = Mode::kDecay;
  double fixed = 0.5;      // kFixed value
  double start = 0.9;      // kDecay: value held for the first hold_epochs
  int hold_epochs = 3;
  double floor = 0.1;      // kDecay: value at the final epoch
  int total_epochs = 0;

  void Validate() const;
};

// Supervised ratio for one epoch. Decay mode holds `start`, then moves
// linearly so the final epoch lands exactly on `floor`.
double AlphaAt(int epoch, const AlphaSchedule& sched);

struct BetaPolicy {
  enum class Kind { kFixed, kMin, kMax, kAvg, kMed };
  Kind kind = Kind::kMin;
  double fixed = 0.5;  // kFixed value, in [0,1]

  void Validate() const;
};

struct BetaResolution {
  double beta_used = 0.0;
  double l_unpair = 0.0;
};

// Applies the policy to L(beta) = l_idt + beta*l_cyc + (1-beta)*l_text over
// the 11-point grid. MIN/MAX tie-break to the smaller beta. Because L is
// affine in beta, the grid mean and grid median both equal L(0.5) exactly,
// so AVG and MED evaluate there and record beta_used = 0.5.
BetaResolution ResolveBeta(double l_idt, double l_cyc, double l_text,
                           const BetaPolicy& policy);

// Experiment naming used by configs and the CLI: "min-unpair-loss",
// "max-...", "avg-...", "med-..." (fixed alpha 0.5) and the "decay-" variants
// (alpha decay 0.9 -> 0.1 with a 3-epoch hold). total_epochs is filled by the
// caller's training config. Unknown names are a config error.
struct ExperimentSetting {
  AlphaSchedule alpha;
  BetaPolicy beta;
};
ExperimentSetting ParseExperimentName(const std::string& name, int total_epochs);
std::string ExperimentName(const ExperimentSetting& s);

}  // namespace cidnst

#endif  // CIDNST_SCHEDULES_HPP_
