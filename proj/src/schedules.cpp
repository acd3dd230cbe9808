// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/schedules.hpp"

#include <cmath>

namespace cidnst {

void AlphaSchedule::Validate() const {
  if (mode == Mode::kFixed) {
    if (!(fixed >= 0.0 && fixed <= 1.0)) {
      Fail(ErrorKind::kConfig, "alpha schedule: fixed value must be in [0,1]");
    }
    return;
  }
  if (!(floor >= 0.0 && floor <= start && start <= 1.0)) {
    Fail(ErrorKind::kConfig, "alpha schedule: need 0 <= floor <= start <= 1");
  }
  if (hold_epochs < 0 || hold_epochs >= total_epochs) {
    Fail(ErrorKind::kConfig, "alpha schedule: need 0 <= hold_epochs < total_epochs");
  }
}

double AlphaAt(int epoch, const AlphaSchedule& sched) {
  sched.Validate();
  if (epoch < 0 || (sched.mode == AlphaSchedule::Mode::kDecay &&
                    epoch >= sched.total_epochs)) {
    Fail(ErrorKind::kRange, "alpha schedule: epoch " + std::to_string(epoch) +
                                " outside [0," +
                                std::to_string(sched.total_epochs) + ")");
  }
  if (sched.mode == AlphaSchedule::Mode::kFixed) return sched.fixed;
  if (epoch < sched.hold_epochs) return sched.start;
  // The final epoch returns the floor itself, not an interpolation that may
  // miss it by rounding.
  if (epoch == sched.total_epochs - 1) return sched.floor;
  int span = sched.total_epochs - 1 - sched.hold_epochs;
  double t = static_cast<double>(epoch - sched.hold_epochs) / span;
  return sched.start + (sched.floor - sched.start) * t;
}

void BetaPolicy::Validate() const {
  if (kind == Kind::kFixed && !(fixed >= 0.0 && fixed <= 1.0)) {
    Fail(ErrorKind::kConfig, "beta policy: fixed value must be in [0,1]");
  }
}

BetaResolution ResolveBeta(double l_idt, double l_cyc, double l_text,
                           const BetaPolicy& policy) {
  policy.Validate();
  if (!std::isfinite(l_idt) || !std::isfinite(l_cyc) || !std::isfinite(l_text)) {
    Fail(ErrorKind::kNumericFault, "beta policy: non-finite component loss");
  }
  // Rearranged form of l_idt + beta*l_cyc + (1-beta)*l_text. A constant base
  // plus beta times a constant slope is exactly monotone in beta under IEEE
  // rounding, so grid extremes land on the endpoints and equal cyc/text
  // collapses the whole grid to one value.
  double base = l_idt + l_text;
  double slope = l_cyc - l_text;
  auto at = [&](double beta) { return base + beta * slope; };
  switch (policy.kind) {
    case BetaPolicy::Kind::kFixed:
      return {policy.fixed, at(policy.fixed)};
    case BetaPolicy::Kind::kAvg:
    case BetaPolicy::Kind::kMed:
      // Affine L over the symmetric 11-point grid: mean and median are both
      // exactly L at the grid midpoint.
      return {0.5, at(0.5)};
    case BetaPolicy::Kind::kMin:
    case BetaPolicy::Kind::kMax: {
      bool want_min = policy.kind == BetaPolicy::Kind::kMin;
      double best_beta = 0.0;
      double best = at(0.0);
      for (int i = 1; i <= 10; i++) {
        double beta = i / 10.0;
        double v = at(beta);
        if (want_min ? v < best : v > best) {  // ties keep the smaller beta
          best = v;
          best_beta = beta;
        }
      }
      return {best_beta, best};
    }
  }
  Fail(ErrorKind::kConfig, "beta policy: unknown kind");
}

ExperimentSetting ParseExperimentName(const std::string& name, int total_epochs) {
  ExperimentSetting s;
  std::string rest = name;
  if (rest.rfind("decay-", 0) == 0) {
    s.alpha.mode = AlphaSchedule::Mode::kDecay;
    s.alpha.total_epochs = total_epochs;
    rest = rest.substr(6);
  } else {
    s.alpha.mode = AlphaSchedule::Mode::kFixed;
    s.alpha.fixed = 0.5;
  }
  if (rest == "min-unpair-loss") {
    s.beta.kind = BetaPolicy::Kind::kMin;
  } else if (rest == "max-unpair-loss") {
    s.beta.kind = BetaPolicy::Kind::kMax;
  } else if (rest == "avg-unpair-loss") {
    s.beta.kind = BetaPolicy::Kind::kAvg;
  } else if (rest == "med-unpair-loss") {
    s.beta.kind = BetaPolicy::Kind::kMed;
  } else {
    Fail(ErrorKind::kConfig, "unknown experiment name: " + name);
  }
  return s;
}

std::string ExperimentName(const ExperimentSetting& s) {
  std::string out;
  if (s.alpha.mode == AlphaSchedule::Mode::kDecay) out += "decay-";
  switch (s.beta.kind) {
    case BetaPolicy::Kind::kMin: out += "min-unpair-loss"; break;
    case BetaPolicy::Kind::kMax: out += "max-unpair-loss"; break;
    case BetaPolicy::Kind::kAvg: out += "avg-unpair-loss"; break;
    case BetaPolicy::Kind::kMed: out += "med-unpair-loss"; break;
    case BetaPolicy::Kind::kFixed:
      Fail(ErrorKind::kConfig, "fixed beta has no table name");
  }
  return out;
}

}  // namespace cidnst
