// cidnst/optim.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/optim.hpp"

#include <cmath>

#include "cidnst/common.hpp"

namespace cidnst {

void AdamConfig::Validate() const {
  if (!(lr > 0)) Fail(ErrorKind::kConfig, "adam.lr: must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) {
    Fail(ErrorKind::kConfig, "adam.beta1: must be in [0, 1)");
  }
  if (!(beta2 >= 0 && beta2 < 1)) {
    Fail(ErrorKind::kConfig, "adam.beta2: must be in [0, 1)");
  }
  if (!(eps > 0)) Fail(ErrorKind::kConfig, "adam.eps: must be > 0");
}

Adam::Adam(std::map<std::string, Var>* params, const AdamConfig& cfg)
    : params_(params), cfg_(cfg) {
  cfg.Validate();
  for (const auto& [name, var] : *params_) {
    m_.emplace(name, Tensor(var->value.Shape()));
    v_.emplace(name, Tensor(var->value.Shape()));
  }
}

double Adam::Step() {
  double sq = 0.0;
  for (const auto& [name, var] : *params_) {
    if (!var->HasGrad()) continue;
    for (double g : var->grad.Vec()) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) {
    Fail(ErrorKind::kTrainingFault,
         "adam: non-finite gradient norm at step " + std::to_string(t_ + 1));
  }
  double scale = 1.0;
  if (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) {
    scale = cfg_.clip_norm / norm;
  }

  t_++;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, var] : *params_) {
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    bool has = var->HasGrad();
    size_t n = var->value.Numel();
    for (size_t i = 0; i < n; i++) {
      double g = has ? var->grad.At(i) * scale : 0.0;
      m.At(i) = cfg_.beta1 * m.At(i) + (1.0 - cfg_.beta1) * g;
      v.At(i) = cfg_.beta2 * v.At(i) + (1.0 - cfg_.beta2) * g * g;
      double mhat = m.At(i) / bc1;
      double vhat = v.At(i) / bc2;
      var->value.At(i) -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    var->grad = Tensor();
  }
  return norm;
}

void Adam::ZeroGrad() {
  for (auto& [name, var] : *params_) var->grad = Tensor();
}

}  // namespace cidnst
