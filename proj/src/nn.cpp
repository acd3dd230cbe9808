// cidnst/nn.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/nn.hpp"

#include "cidnst/common.hpp"

namespace cidnst {

std::map<std::string, Var> InitParams(const std::vector<ParamSpec>& specs,
                                      uint64_t seed) {
  std::map<std::string, Var> params;
  for (const ParamSpec& s : specs) {
    Tensor t({s.rows, s.cols});
    if (s.kind == ParamSpec::kWeight) {
      Rng rng(DeriveSeed(seed, "init/" + s.name));
      double limit = std::sqrt(6.0 / (s.rows + s.cols));
      for (double& x : t.Vec()) x = rng.Uniform(-limit, limit);
    } else if (s.kind == ParamSpec::kLstmBias) {
      int k = s.cols / 4;
      for (int j = k; j < 2 * k; j++) t.At(0, j) = 1.0;
    }
    params.emplace(s.name, Param(std::move(t)));
  }
  return params;
}

std::map<std::string, Var> ShapedParams(const std::vector<ParamSpec>& specs) {
  std::map<std::string, Var> params;
  for (const ParamSpec& s : specs) {
    params.emplace(s.name, Param(Tensor({s.rows, s.cols})));
  }
  return params;
}

void ValidateParams(const std::vector<ParamSpec>& specs,
                    const std::map<std::string, Var>& params,
                    const std::string& scope) {
  if (params.size() != specs.size()) {
    Fail(ErrorKind::kShape, scope + ": parameter count mismatch");
  }
  for (const ParamSpec& s : specs) {
    auto it = params.find(s.name);
    if (it == params.end()) {
      Fail(ErrorKind::kShape, scope + ": missing parameter " + s.name);
    }
    const Tensor& t = it->second->value;
    if (t.Rank() != 2 || t.Dim(0) != s.rows || t.Dim(1) != s.cols) {
      Fail(ErrorKind::kShape, scope + ": bad shape for " + s.name);
    }
  }
}

LstmParams FindLstm(const std::map<std::string, Var>& params,
                    const std::string& prefix) {
  auto get = [&](const char* leaf) {
    auto it = params.find(prefix + leaf);
    if (it == params.end()) {
      Fail(ErrorKind::kConfig, "missing parameter " + prefix + leaf);
    }
    return it->second;
  };
  LstmParams r{get(".wx"), get(".wh"), get(".b"), 0};
  r.units = r.b->value.Dim(1) / 4;
  return r;
}

void LstmGraphStep(const LstmParams& p, const Var& x, Var* h, Var* c) {
  int k = p.units;
  Var gates = AddRowVec(Add(MatMul(x, p.wx), MatMul(*h, p.wh)), p.b);
  Var gi = Sigmoid(SliceCols(gates, 0, k));
  Var gf = Sigmoid(SliceCols(gates, k, 2 * k));
  Var gg = Tanh(SliceCols(gates, 2 * k, 3 * k));
  Var go = Sigmoid(SliceCols(gates, 3 * k, 4 * k));
  *c = Add(Mul(gf, *c), Mul(gi, gg));
  *h = Mul(go, Tanh(*c));
}

}  // namespace cidnst
