// cidnst/mmd.hpp  Kernel maximum mean discrepancy between two sets of
// latent frame vectors, as a differentiable graph node.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_MMD_HPP_
#define CIDNST_MMD_HPP_

#include "cidnst/autodiff.hpp"

namespace cidnst {

// Gaussian-RBF kernel, biased (V-statistic) estimator. Bandwidth is either
// fixed or the median heuristic: the lower median of pairwise Euclidean
// distances over the union of both sets, falling back to 1 when that median
// is 0 (all points identical).
struct MmdConfig {
  enum class Bandwidth { kMedian, kFixed };
  Bandwidth bandwidth = Bandwidth::kMedian;
  double sigma = 1.0;  // used when bandwidth == kFixed; must be > 0
};

// Resolves the bandwidth the estimator will use for these operands. Exposed
// so callers can freeze it (gradient checks, reproducible logging).
double ResolveSigma(const Tensor& a, const Tensor& b, const MmdConfig& cfg);

// Biased squared-MMD node at a fixed bandwidth:
//   mean k(a,a) + mean k(b,b) - 2 mean k(a,b), clamped at 0.
// Rows are the sample vectors. The clamp zeroes the gradient when the raw
// estimate is <= 0. sigma is treated as a constant by the gradient.
Var MmdNode(const Var& a, const Var& b, double sigma);

// MmdNode with the bandwidth resolved from cfg on the operand values.
Var MmdLoss(const Var& a, const Var& b, const MmdConfig& cfg);

// Value-only convenience.
double Mmd(const Tensor& a, const Tensor& b, const MmdConfig& cfg);

}  // namespace cidnst

#endif  // CIDNST_MMD_HPP_
