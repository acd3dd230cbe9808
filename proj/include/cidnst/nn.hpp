// cidnst/nn.hpp  Shared network building blocks: named-parameter
// initialization and the LSTM cell in graph and value modes.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_NN_HPP_
#define CIDNST_NN_HPP_

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cidnst/autodiff.hpp"

namespace cidnst {

// Canonical description of one [rows, cols] parameter tensor. Weights draw
// Glorot-uniform values from a stream derived from the tensor's own name, so
// the layout of one layer never shifts another's values. Biases start at
// zero, except LSTM biases whose forget block starts at 1 so memory is open.
struct ParamSpec {
  std::string name;
  int rows = 0, cols = 0;
  enum Kind { kWeight, kBias, kLstmBias } kind = kWeight;
};

std::map<std::string, Var> InitParams(const std::vector<ParamSpec>& specs,
                                      uint64_t seed);
std::map<std::string, Var> ShapedParams(const std::vector<ParamSpec>& specs);
// Checks a caller-supplied parameter set against the specs: exact name set,
// exact shapes. `scope` prefixes error messages.
void ValidateParams(const std::vector<ParamSpec>& specs,
                    const std::map<std::string, Var>& params,
                    const std::string& scope);

// Gate layout inside every [1,4K] LSTM pre-activation: input, forget, cell,
// output.
struct LstmParams {
  Var wx, wh, b;
  int units = 0;
};

// Pulls <prefix>.wx/.wh/.b out of a parameter map.
LstmParams FindLstm(const std::map<std::string, Var>& params,
                    const std::string& prefix);

// One graph-mode step; h and c are [1,K] and replaced by the new state.
void LstmGraphStep(const LstmParams& p, const Var& x, Var* h, Var* c);

// y[j] += sum_k x[k] * w[k, j], accumulated in the same order as the graph
// matmul so the graph and value decode paths agree to rounding noise.
inline void AccumMatVec(const double* x, const Tensor& w, double* y) {
  int in = w.Dim(0), out = w.Dim(1);
  const double* pw = w.Data();
  for (int k = 0; k < in; k++) {
    double xv = x[k];
    if (xv == 0.0) continue;
    const double* row = pw + static_cast<size_t>(k) * out;
    for (int j = 0; j < out; j++) y[j] += xv * row[j];
  }
}

// Value-mode twin of LstmGraphStep, same arithmetic order gate by gate.
inline void LstmValueStep(const LstmParams& p, const double* x,
                          std::vector<double>* h, std::vector<double>* c) {
  int k = p.units;
  std::vector<double> gates(p.b->value.Vec());
  AccumMatVec(x, p.wx->value, gates.data());
  AccumMatVec(h->data(), p.wh->value, gates.data());
  auto sigm = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (int j = 0; j < k; j++) {
    double gi = sigm(gates[j]);
    double gf = sigm(gates[k + j]);
    double gg = std::tanh(gates[2 * k + j]);
    double go = sigm(gates[3 * k + j]);
    (*c)[j] = gf * (*c)[j] + gi * gg;
    (*h)[j] = go * std::tanh((*c)[j]);
  }
}

}  // namespace cidnst

#endif  // CIDNST_NN_HPP_
