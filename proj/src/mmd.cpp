// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

namespace cidnst {

namespace {

void CheckOperands(const Tensor& a, const Tensor& b) {
  if (a.Rank() != 2 || b.Rank() != 2) {
    Fail(ErrorKind::kShape, "mmd: operands must be rank-2 sets of row vectors");
  }
  if (a.Dim(0) < 1 || b.Dim(0) < 1) {
    Fail(ErrorKind::kEmptyBatch, "mmd: each set needs at least one vector");
  }
  if (a.Dim(1) != b.Dim(1)) {
    Fail(ErrorKind::kShape, "mmd: vector widths differ, " + a.ShapeStr() +
                                " vs " + b.ShapeStr());
  }
}

double SqDist(const double* x, const double* y, int h) {
  double s = 0.0;
  for (int j = 0; j < h; j++) {
    double d = x[j] - y[j];
    s += d * d;
  }
  return s;
}

// Sums in ascending value order. Pairwise kernel values form a multiset that
// does not depend on point order or operand order, so summing them in sorted
// order makes the estimate bit-exactly symmetric and permutation-invariant.
double SortedSum(const Tensor& k) {
  std::vector<double> v = k.Vec();
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

double ResolveSigma(const Tensor& a, const Tensor& b, const MmdConfig& cfg) {
  CheckOperands(a, b);
  if (cfg.bandwidth == MmdConfig::Bandwidth::kFixed) {
    if (!(cfg.sigma > 0.0)) {
      Fail(ErrorKind::kDomain, "mmd: fixed bandwidth must be > 0");
    }
    return cfg.sigma;
  }
  int m = a.Dim(0), n = b.Dim(0), h = a.Dim(1);
  std::vector<const double*> pts;
  pts.reserve(static_cast<size_t>(m) + n);
  for (int i = 0; i < m; i++) pts.push_back(a.Data() + static_cast<size_t>(i) * h);
  for (int i = 0; i < n; i++) pts.push_back(b.Data() + static_cast<size_t>(i) * h);
  std::vector<double> dists;
  dists.reserve(pts.size() * (pts.size() - 1) / 2);
  for (size_t i = 0; i < pts.size(); i++) {
    for (size_t j = i + 1; j < pts.size(); j++) {
      dists.push_back(std::sqrt(SqDist(pts[i], pts[j], h)));
    }
  }
  // Lower median, a deterministic order statistic.
  size_t mid = (dists.size() - 1) / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  double med = dists[mid];
  return med > 0.0 ? med : 1.0;
}

Var MmdNode(const Var& a, const Var& b, double sigma) {
  CheckOperands(a->value, b->value);
  if (!(sigma > 0.0)) Fail(ErrorKind::kDomain, "mmd: bandwidth must be > 0");
  int m = a->value.Dim(0), n = b->value.Dim(0), h = a->value.Dim(1);
  double inv2s2 = 1.0 / (2.0 * sigma * sigma);

  // Kernel matrices are kept for the backward pass.
  auto kaa = std::make_shared<Tensor>(std::vector<int>{m, m});
  auto kbb = std::make_shared<Tensor>(std::vector<int>{n, n});
  auto kab = std::make_shared<Tensor>(std::vector<int>{m, n});
  const double* pa = a->value.Data();
  const double* pb = b->value.Data();
  for (int i = 0; i < m; i++) {
    for (int j = 0; j < m; j++) {
      kaa->At(i, j) = std::exp(-SqDist(pa + static_cast<size_t>(i) * h,
                                       pa + static_cast<size_t>(j) * h, h) * inv2s2);
    }
  }
  for (int i = 0; i < n; i++) {
    for (int j = 0; j < n; j++) {
      kbb->At(i, j) = std::exp(-SqDist(pb + static_cast<size_t>(i) * h,
                                       pb + static_cast<size_t>(j) * h, h) * inv2s2);
    }
  }
  for (int i = 0; i < m; i++) {
    for (int j = 0; j < n; j++) {
      kab->At(i, j) = std::exp(-SqDist(pa + static_cast<size_t>(i) * h,
                                       pb + static_cast<size_t>(j) * h, h) * inv2s2);
    }
  }
  double raw = SortedSum(*kaa) / (static_cast<double>(m) * m) +
               SortedSum(*kbb) / (static_cast<double>(n) * n) -
               2.0 * SortedSum(*kab) / (static_cast<double>(m) * n);
  bool clamped = raw <= 0.0;
  double value = clamped ? 0.0 : raw;

  auto node = std::make_shared<Node>();
  node->op = "mmd";
  node->value = Tensor::Scalar(value);
  node->parents = {a, b};
  node->requires_grad = a->requires_grad || b->requires_grad;
  if (node->requires_grad && !clamped) {
    double invs2 = 1.0 / (sigma * sigma);
    node->vjp = [m, n, h, invs2, kaa, kbb, kab](Node& nd) {
      double g = nd.grad.Item();
      const Var& a = nd.parents[0];
      const Var& b = nd.parents[1];
      const double* pa = a->value.Data();
      const double* pb = b->value.Data();
      if (a->requires_grad) {
        double* da = a->EnsureGrad().Data();
        double waa = 2.0 / (static_cast<double>(m) * m);
        double wab = 2.0 / (static_cast<double>(m) * n);
        for (int p = 0; p < m; p++) {
          double* dp = da + static_cast<size_t>(p) * h;
          const double* xp = pa + static_cast<size_t>(p) * h;
          for (int j = 0; j < m; j++) {
            double c = g * waa * kaa->At(p, j) * invs2;
            const double* xj = pa + static_cast<size_t>(j) * h;
            for (int t = 0; t < h; t++) dp[t] += c * (xj[t] - xp[t]);
          }
          for (int j = 0; j < n; j++) {
            double c = g * wab * kab->At(p, j) * invs2;
            const double* yj = pb + static_cast<size_t>(j) * h;
            for (int t = 0; t < h; t++) dp[t] -= c * (yj[t] - xp[t]);
          }
        }
      }
      if (b->requires_grad) {
        double* db = b->EnsureGrad().Data();
        double wbb = 2.0 / (static_cast<double>(n) * n);
        double wab = 2.0 / (static_cast<double>(m) * n);
        for (int q = 0; q < n; q++) {
          double* dq = db + static_cast<size_t>(q) * h;
          const double* yq = pb + static_cast<size_t>(q) * h;
          for (int j = 0; j < n; j++) {
            double c = g * wbb * kbb->At(q, j) * invs2;
            const double* yj = pb + static_cast<size_t>(j) * h;
            for (int t = 0; t < h; t++) dq[t] += c * (yj[t] - yq[t]);
          }
          for (int i = 0; i < m; i++) {
            double c = g * wab * kab->At(i, q) * invs2;
            const double* xi = pa + static_cast<size_t>(i) * h;
            for (int t = 0; t < h; t++) dq[t] -= c * (xi[t] - yq[t]);
          }
        }
      }
    };
  } else if (node->requires_grad) {
    node->vjp = [](Node&) {};  // clamped at 0: zero gradient
  }
  return node;
}

Var MmdLoss(const Var& a, const Var& b, const MmdConfig& cfg) {
  return MmdNode(a, b, ResolveSigma(a->value, b->value, cfg));
}

double Mmd(const Tensor& a, const Tensor& b, const MmdConfig& cfg) {
  return MmdLoss(Constant(a), Constant(b), cfg)->value.Item();
}

}  // namespace cidnst
