// cidnst/optim.hpp  Adam with global-norm gradient clipping over a named
// parameter set. Updates follow the map's sorted iteration order, so a run
// is reproducible from its seed alone.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_OPTIM_HPP_
#define CIDNST_OPTIM_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "cidnst/autodiff.hpp"

namespace cidnst {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global gradient norm cap; <= 0 disables

  void Validate() const;
};

// The parameter map outlives the optimizer; moment tensors are keyed by the
// same names. A parameter outside the current graph contributes a zero
// gradient to the step, which still decays its moments.
class Adam {
 public:
  Adam(std::map<std::string, Var>* params, const AdamConfig& cfg);

  // One update from the gradients accumulated on the parameters; gradients
  // are cleared afterwards. Returns the pre-clip global gradient norm.
  // A non-finite gradient is a training fault.
  double Step();

  void ZeroGrad();
  int64_t Steps() const { return t_; }

 private:
  std::map<std::string, Var>* params_;
  AdamConfig cfg_;
  std::map<std::string, Tensor> m_, v_;
  int64_t t_ = 0;
};

}  // namespace cidnst

#endif  // CIDNST_OPTIM_HPP_
