// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "cidnst/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace cidnst {

namespace {

[[noreturn]] void ShapeFail(const char* op, const Tensor& a, const Tensor& b) {
  Fail(ErrorKind::kShape, std::string(op) + ": operand shapes " + a.ShapeStr() +
                              " and " + b.ShapeStr() + " do not conform");
}

Var MakeNode(const char* op, Tensor value, std::vector<Var> parents,
             std::function<void(Node&)> vjp) {
  if (!value.AllFinite()) {
    Fail(ErrorKind::kNumericFault,
         std::string(op) + ": non-finite output of shape " + value.ShapeStr());
  }
  auto n = std::make_shared<Node>();
  n->op = op;
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) n->vjp = std::move(vjp);
  return n;
}

// Accumulate src (scaled view given by fn) into parent's gradient if needed.
inline bool Wants(const Var& p) { return p->requires_grad; }

void RequireRank2(const char* op, const Tensor& t) {
  if (t.Rank() != 2) {
    Fail(ErrorKind::kShape,
         std::string(op) + ": expected rank-2 operand, got " + t.ShapeStr());
  }
}

}  // namespace

Var Constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->op = "constant";
  n->value = std::move(v);
  return n;
}

Var Param(Tensor v) {
  auto n = std::make_shared<Node>();
  n->op = "param";
  n->value = std::move(v);
  n->requires_grad = true;
  return n;
}

Var MatMul(const Var& a, const Var& b) {
  const Tensor& A = a->value;
  const Tensor& B = b->value;
  RequireRank2("matmul", A);
  RequireRank2("matmul", B);
  if (A.Dim(1) != B.Dim(0)) ShapeFail("matmul", A, B);
  int m = A.Dim(0), k = A.Dim(1), n = B.Dim(1);
  Tensor C({m, n});
  const double* pa = A.Data();
  const double* pb = B.Data();
  double* pc = C.Data();
  for (int i = 0; i < m; i++) {
    for (int p = 0; p < k; p++) {
      double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      double* crow = pc + i * n;
      for (int j = 0; j < n; j++) crow[j] += av * brow[j];
    }
  }
  return MakeNode("matmul", std::move(C), {a, b}, [m, k, n](Node& node) {
    const Tensor& G = node.grad;
    const Var& a = node.parents[0];
    const Var& b = node.parents[1];
    if (Wants(a)) {  // dA = G * B^T
      double* da = a->EnsureGrad().Data();
      const double* pb = b->value.Data();
      const double* pg = G.Data();
      for (int i = 0; i < m; i++) {
        for (int p = 0; p < k; p++) {
          double s = 0.0;
          const double* grow = pg + i * n;
          const double* brow = pb + p * n;
          for (int j = 0; j < n; j++) s += grow[j] * brow[j];
          da[i * k + p] += s;
        }
      }
    }
    if (Wants(b)) {  // dB = A^T * G
      double* db = b->EnsureGrad().Data();
      const double* pa = a->value.Data();
      const double* pg = G.Data();
      for (int p = 0; p < k; p++) {
        for (int i = 0; i < m; i++) {
          double av = pa[i * k + p];
          if (av == 0.0) continue;
          const double* grow = pg + i * n;
          double* brow = db + p * n;
          for (int j = 0; j < n; j++) brow[j] += av * grow[j];
        }
      }
    }
  });
}

Var Add(const Var& a, const Var& b) {
  if (!a->value.SameShape(b->value)) ShapeFail("add", a->value, b->value);
  Tensor out = a->value;
  const double* pb = b->value.Data();
  double* po = out.Data();
  for (size_t i = 0; i < out.Numel(); i++) po[i] += pb[i];
  return MakeNode("add", std::move(out), {a, b}, [](Node& node) {
    for (int s = 0; s < 2; s++) {
      const Var& p = node.parents[s];
      if (!Wants(p)) continue;
      double* dp = p->EnsureGrad().Data();
      const double* g = node.grad.Data();
      for (size_t i = 0; i < node.grad.Numel(); i++) dp[i] += g[i];
    }
  });
}

Var Sub(const Var& a, const Var& b) {
  if (!a->value.SameShape(b->value)) ShapeFail("sub", a->value, b->value);
  Tensor out = a->value;
  const double* pb = b->value.Data();
  double* po = out.Data();
  for (size_t i = 0; i < out.Numel(); i++) po[i] -= pb[i];
  return MakeNode("sub", std::move(out), {a, b}, [](Node& node) {
    const double* g = node.grad.Data();
    size_t n = node.grad.Numel();
    if (Wants(node.parents[0])) {
      double* d = node.parents[0]->EnsureGrad().Data();
      for (size_t i = 0; i < n; i++) d[i] += g[i];
    }
    if (Wants(node.parents[1])) {
      double* d = node.parents[1]->EnsureGrad().Data();
      for (size_t i = 0; i < n; i++) d[i] -= g[i];
    }
  });
}

Var Mul(const Var& a, const Var& b) {
  if (!a->value.SameShape(b->value)) ShapeFail("mul", a->value, b->value);
  Tensor out = a->value;
  const double* pb = b->value.Data();
  double* po = out.Data();
  for (size_t i = 0; i < out.Numel(); i++) po[i] *= pb[i];
  return MakeNode("mul", std::move(out), {a, b}, [](Node& node) {
    const double* g = node.grad.Data();
    size_t n = node.grad.Numel();
    const Var& a = node.parents[0];
    const Var& b = node.parents[1];
    if (Wants(a)) {
      double* d = a->EnsureGrad().Data();
      const double* vb = b->value.Data();
      for (size_t i = 0; i < n; i++) d[i] += g[i] * vb[i];
    }
    if (Wants(b)) {
      double* d = b->EnsureGrad().Data();
      const double* va = a->value.Data();
      for (size_t i = 0; i < n; i++) d[i] += g[i] * va[i];
    }
  });
}

Var AddRowVec(const Var& m, const Var& v) {
  const Tensor& M = m->value;
  const Tensor& V = v->value;
  RequireRank2("add_rowvec", M);
  RequireRank2("add_rowvec", V);
  if (V.Dim(0) != 1 || V.Dim(1) != M.Dim(1)) ShapeFail("add_rowvec", M, V);
  int r = M.Dim(0), c = M.Dim(1);
  Tensor out = M;
  double* po = out.Data();
  const double* pv = V.Data();
  for (int i = 0; i < r; i++) {
    for (int j = 0; j < c; j++) po[i * c + j] += pv[j];
  }
  return MakeNode("add_rowvec", std::move(out), {m, v}, [r, c](Node& node) {
    const double* g = node.grad.Data();
    if (Wants(node.parents[0])) {
      double* d = node.parents[0]->EnsureGrad().Data();
      for (size_t i = 0; i < node.grad.Numel(); i++) d[i] += g[i];
    }
    if (Wants(node.parents[1])) {
      double* d = node.parents[1]->EnsureGrad().Data();
      for (int i = 0; i < r; i++) {
        for (int j = 0; j < c; j++) d[j] += g[i * c + j];
      }
    }
  });
}

Var Scale(const Var& a, double c) {
  Tensor out = a->value;
  for (double& x : out.Vec()) x *= c;
  return MakeNode("scale", std::move(out), {a}, [c](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    for (size_t i = 0; i < node.grad.Numel(); i++) d[i] += c * g[i];
  });
}

Var Tanh(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.Vec()) x = std::tanh(x);
  return MakeNode("tanh", std::move(out), {a}, [](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    const double* y = node.value.Data();
    for (size_t i = 0; i < node.grad.Numel(); i++) {
      d[i] += g[i] * (1.0 - y[i] * y[i]);
    }
  });
}

Var Sigmoid(const Var& a) {
  Tensor out = a->value;
  for (double& x : out.Vec()) x = 1.0 / (1.0 + std::exp(-x));
  return MakeNode("sigmoid", std::move(out), {a}, [](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    const double* y = node.value.Data();
    for (size_t i = 0; i < node.grad.Numel(); i++) {
      d[i] += g[i] * y[i] * (1.0 - y[i]);
    }
  });
}

Var SoftmaxRows(const Var& a) {
  const Tensor& A = a->value;
  RequireRank2("softmax", A);
  int r = A.Dim(0), c = A.Dim(1);
  Tensor out({r, c});
  for (int i = 0; i < r; i++) {
    const double* row = A.Data() + static_cast<size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; j++) mx = std::max(mx, row[j]);
    double z = 0.0;
    double* orow = out.Data() + static_cast<size_t>(i) * c;
    for (int j = 0; j < c; j++) {
      orow[j] = std::exp(row[j] - mx);
      z += orow[j];
    }
    for (int j = 0; j < c; j++) orow[j] /= z;
  }
  return MakeNode("softmax", std::move(out), {a}, [r, c](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    const double* y = node.value.Data();
    for (int i = 0; i < r; i++) {
      const double* gr = g + static_cast<size_t>(i) * c;
      const double* yr = y + static_cast<size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; j++) dot += gr[j] * yr[j];
      double* dr = d + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; j++) dr[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var LogSoftmaxRows(const Var& a) {
  const Tensor& A = a->value;
  RequireRank2("log_softmax", A);
  int r = A.Dim(0), c = A.Dim(1);
  Tensor out({r, c});
  for (int i = 0; i < r; i++) {
    const double* row = A.Data() + static_cast<size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; j++) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < c; j++) z += std::exp(row[j] - mx);
    double lz = mx + std::log(z);
    double* orow = out.Data() + static_cast<size_t>(i) * c;
    for (int j = 0; j < c; j++) orow[j] = row[j] - lz;
  }
  return MakeNode("log_softmax", std::move(out), {a}, [r, c](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    const double* y = node.value.Data();
    for (int i = 0; i < r; i++) {
      const double* gr = g + static_cast<size_t>(i) * c;
      const double* yr = y + static_cast<size_t>(i) * c;
      double gsum = 0.0;
      for (int j = 0; j < c; j++) gsum += gr[j];
      double* dr = d + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; j++) dr[j] += gr[j] - std::exp(yr[j]) * gsum;
    }
  });
}

Var LogsumexpRows(const Var& a) {
  const Tensor& A = a->value;
  RequireRank2("logsumexp", A);
  int r = A.Dim(0), c = A.Dim(1);
  Tensor out({r, 1});
  for (int i = 0; i < r; i++) {
    const double* row = A.Data() + static_cast<size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; j++) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int j = 0; j < c; j++) z += std::exp(row[j] - mx);
    out.At(static_cast<size_t>(i)) = mx + std::log(z);
  }
  return MakeNode("logsumexp", std::move(out), {a}, [r, c](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    const double* x = node.parents[0]->value.Data();
    const double* y = node.value.Data();
    for (int i = 0; i < r; i++) {
      const double* xr = x + static_cast<size_t>(i) * c;
      double* dr = d + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; j++) dr[j] += g[i] * std::exp(xr[j] - y[i]);
    }
  });
}

Var L1Norm(const Var& a) {
  double s = 0.0;
  for (double x : a->value.Vec()) s += std::fabs(x);
  // Subgradient at exactly zero is taken as 0.
  return MakeNode("l1norm", Tensor::Scalar(s), {a}, [](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* x = node.parents[0]->value.Data();
    double g = node.grad.Item();
    for (size_t i = 0; i < node.parents[0]->value.Numel(); i++) {
      d[i] += g * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
    }
  });
}

Var SumAll(const Var& a) {
  double s = 0.0;
  for (double x : a->value.Vec()) s += x;
  return MakeNode("sum", Tensor::Scalar(s), {a}, [](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    double g = node.grad.Item();
    for (size_t i = 0; i < node.parents[0]->value.Numel(); i++) d[i] += g;
  });
}

Var MeanAll(const Var& a) {
  size_t n = a->value.Numel();
  if (n == 0) Fail(ErrorKind::kShape, "mean: empty tensor");
  double s = 0.0;
  for (double x : a->value.Vec()) s += x;
  double inv = 1.0 / static_cast<double>(n);
  return MakeNode("mean", Tensor::Scalar(s * inv), {a}, [inv](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    double g = node.grad.Item() * inv;
    for (size_t i = 0; i < node.parents[0]->value.Numel(); i++) d[i] += g;
  });
}

Var Transpose(const Var& a) {
  const Tensor& A = a->value;
  RequireRank2("transpose", A);
  int r = A.Dim(0), c = A.Dim(1);
  Tensor out({c, r});
  for (int i = 0; i < r; i++) {
    for (int j = 0; j < c; j++) out.At(j, i) = A.At(i, j);
  }
  return MakeNode("transpose", std::move(out), {a}, [r, c](Node& node) {
    if (!Wants(node.parents[0])) return;
    Tensor& d = node.parents[0]->EnsureGrad();
    for (int i = 0; i < r; i++) {
      for (int j = 0; j < c; j++) d.At(i, j) += node.grad.At(j, i);
    }
  });
}

Var Concat(const Var& a, const Var& b, int axis) {
  const Tensor& A = a->value;
  const Tensor& B = b->value;
  RequireRank2("concat", A);
  RequireRank2("concat", B);
  if (axis != 0 && axis != 1) Fail(ErrorKind::kShape, "concat: axis must be 0 or 1");
  if (A.Dim(1 - axis) != B.Dim(1 - axis)) ShapeFail("concat", A, B);
  int r = axis == 0 ? A.Dim(0) + B.Dim(0) : A.Dim(0);
  int c = axis == 1 ? A.Dim(1) + B.Dim(1) : A.Dim(1);
  Tensor out({r, c});
  if (axis == 0) {
    std::copy(A.Vec().begin(), A.Vec().end(), out.Vec().begin());
    std::copy(B.Vec().begin(), B.Vec().end(), out.Vec().begin() + A.Numel());
  } else {
    for (int i = 0; i < r; i++) {
      for (int j = 0; j < A.Dim(1); j++) out.At(i, j) = A.At(i, j);
      for (int j = 0; j < B.Dim(1); j++) out.At(i, A.Dim(1) + j) = B.At(i, j);
    }
  }
  int ar = A.Dim(0), ac = A.Dim(1);
  return MakeNode("concat", std::move(out), {a, b}, [axis, ar, ac](Node& node) {
    const Tensor& G = node.grad;
    if (axis == 0) {
      if (Wants(node.parents[0])) {
        double* d = node.parents[0]->EnsureGrad().Data();
        const double* g = G.Data();
        for (size_t i = 0; i < node.parents[0]->value.Numel(); i++) d[i] += g[i];
      }
      if (Wants(node.parents[1])) {
        double* d = node.parents[1]->EnsureGrad().Data();
        const double* g = G.Data() + node.parents[0]->value.Numel();
        for (size_t i = 0; i < node.parents[1]->value.Numel(); i++) d[i] += g[i];
      }
    } else {
      if (Wants(node.parents[0])) {
        Tensor& d = node.parents[0]->EnsureGrad();
        for (int i = 0; i < ar; i++) {
          for (int j = 0; j < ac; j++) d.At(i, j) += G.At(i, j);
        }
      }
      if (Wants(node.parents[1])) {
        Tensor& d = node.parents[1]->EnsureGrad();
        int bc = node.parents[1]->value.Dim(1);
        for (int i = 0; i < ar; i++) {
          for (int j = 0; j < bc; j++) d.At(i, j) += G.At(i, ac + j);
        }
      }
    }
  });
}

Var StackRows(const std::vector<Var>& rows) {
  if (rows.empty()) Fail(ErrorKind::kShape, "stack_rows: no rows");
  int c = rows[0]->value.Cols();
  for (const auto& r : rows) {
    RequireRank2("stack_rows", r->value);
    if (r->value.Dim(0) != 1 || r->value.Dim(1) != c) {
      ShapeFail("stack_rows", rows[0]->value, r->value);
    }
  }
  int k = static_cast<int>(rows.size());
  Tensor out({k, c});
  for (int i = 0; i < k; i++) {
    std::copy(rows[i]->value.Vec().begin(), rows[i]->value.Vec().end(),
              out.Vec().begin() + static_cast<size_t>(i) * c);
  }
  return MakeNode("stack_rows", std::move(out), rows, [c](Node& node) {
    for (size_t i = 0; i < node.parents.size(); i++) {
      const Var& p = node.parents[i];
      if (!Wants(p)) continue;
      double* d = p->EnsureGrad().Data();
      const double* g = node.grad.Data() + i * c;
      for (int j = 0; j < c; j++) d[j] += g[j];
    }
  });
}

Var SliceRows(const Var& a, int r0, int r1) {
  const Tensor& A = a->value;
  RequireRank2("slice_rows", A);
  if (r0 < 0 || r1 > A.Dim(0) || r0 >= r1) {
    Fail(ErrorKind::kShape, "slice_rows: range [" + std::to_string(r0) + "," +
                                std::to_string(r1) + ") out of " + A.ShapeStr());
  }
  int c = A.Dim(1);
  Tensor out({r1 - r0, c});
  std::copy(A.Vec().begin() + static_cast<size_t>(r0) * c,
            A.Vec().begin() + static_cast<size_t>(r1) * c, out.Vec().begin());
  return MakeNode("slice_rows", std::move(out), {a}, [r0, c](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data() + static_cast<size_t>(r0) * c;
    const double* g = node.grad.Data();
    for (size_t i = 0; i < node.grad.Numel(); i++) d[i] += g[i];
  });
}

Var SliceCols(const Var& a, int c0, int c1) {
  const Tensor& A = a->value;
  RequireRank2("slice_cols", A);
  if (c0 < 0 || c1 > A.Dim(1) || c0 >= c1) {
    Fail(ErrorKind::kShape, "slice_cols: range [" + std::to_string(c0) + "," +
                                std::to_string(c1) + ") out of " + A.ShapeStr());
  }
  int r = A.Dim(0), c = A.Dim(1), w = c1 - c0;
  Tensor out({r, w});
  for (int i = 0; i < r; i++) {
    for (int j = 0; j < w; j++) out.At(i, j) = A.At(i, c0 + j);
  }
  return MakeNode("slice_cols", std::move(out), {a}, [r, c, c0, w](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    for (int i = 0; i < r; i++) {
      for (int j = 0; j < w; j++) d[i * c + c0 + j] += g[i * w + j];
    }
  });
}

Var Reshape(const Var& a, std::vector<int> shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  if (n != a->value.Numel()) {
    Fail(ErrorKind::kShape, "reshape: cannot view " + a->value.ShapeStr() +
                                " as requested shape");
  }
  Tensor out(std::move(shape), a->value.Vec());
  return MakeNode("reshape", std::move(out), {a}, [](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    for (size_t i = 0; i < node.grad.Numel(); i++) d[i] += g[i];
  });
}

Var Embedding(const Var& table, const std::vector<int>& ids) {
  const Tensor& T = table->value;
  RequireRank2("embedding", T);
  int v = T.Dim(0), h = T.Dim(1);
  for (int id : ids) {
    if (id < 0 || id >= v) {
      Fail(ErrorKind::kVocab, "embedding: id " + std::to_string(id) +
                                  " out of vocabulary of size " + std::to_string(v));
    }
  }
  int n = static_cast<int>(ids.size());
  Tensor out({n, h});
  for (int i = 0; i < n; i++) {
    std::copy(T.Vec().begin() + static_cast<size_t>(ids[i]) * h,
              T.Vec().begin() + static_cast<size_t>(ids[i] + 1) * h,
              out.Vec().begin() + static_cast<size_t>(i) * h);
  }
  return MakeNode("embedding", std::move(out), {table}, [ids, h](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    for (size_t i = 0; i < ids.size(); i++) {
      double* drow = d + static_cast<size_t>(ids[i]) * h;
      const double* grow = g + i * h;
      for (int j = 0; j < h; j++) drow[j] += grow[j];
    }
  });
}

Var GatherCols(const Var& a, const std::vector<int>& ids) {
  const Tensor& A = a->value;
  RequireRank2("gather_cols", A);
  if (static_cast<int>(ids.size()) != A.Dim(0)) {
    Fail(ErrorKind::kShape, "gather_cols: need one index per row of " + A.ShapeStr());
  }
  int r = A.Dim(0), c = A.Dim(1);
  for (int id : ids) {
    if (id < 0 || id >= c) {
      Fail(ErrorKind::kShape, "gather_cols: column " + std::to_string(id) +
                                  " out of " + A.ShapeStr());
    }
  }
  Tensor out({r, 1});
  for (int i = 0; i < r; i++) out.At(static_cast<size_t>(i)) = A.At(i, ids[i]);
  return MakeNode("gather_cols", std::move(out), {a}, [ids, c](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    for (size_t i = 0; i < ids.size(); i++) d[i * c + ids[i]] += g[i];
  });
}

Var TimeMask(const Var& a, int t0, int len, double fill) {
  const Tensor& A = a->value;
  RequireRank2("time_mask", A);
  int r = A.Dim(0), c = A.Dim(1);
  if (t0 < 0 || len < 0 || t0 + len > r) {
    Fail(ErrorKind::kShape, "time_mask: rows [" + std::to_string(t0) + "," +
                                std::to_string(t0 + len) + ") out of " + A.ShapeStr());
  }
  Tensor out = A;
  for (int i = t0; i < t0 + len; i++) {
    for (int j = 0; j < c; j++) out.At(i, j) = fill;
  }
  return MakeNode("time_mask", std::move(out), {a}, [t0, len, c](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    int r = node.value.Dim(0);
    for (int i = 0; i < r; i++) {
      if (i >= t0 && i < t0 + len) continue;
      for (int j = 0; j < c; j++) d[i * c + j] += g[i * c + j];
    }
  });
}

Var PadRows(const Var& a, int total_rows) {
  const Tensor& A = a->value;
  RequireRank2("pad_rows", A);
  int r = A.Dim(0), c = A.Dim(1);
  if (total_rows < r) {
    Fail(ErrorKind::kShape, "pad_rows: target rows " + std::to_string(total_rows) +
                                " smaller than " + A.ShapeStr());
  }
  Tensor out({total_rows, c});
  std::copy(A.Vec().begin(), A.Vec().end(), out.Vec().begin());
  return MakeNode("pad_rows", std::move(out), {a}, [r, c](Node& node) {
    if (!Wants(node.parents[0])) return;
    double* d = node.parents[0]->EnsureGrad().Data();
    const double* g = node.grad.Data();
    for (size_t i = 0; i < static_cast<size_t>(r) * c; i++) d[i] += g[i];
  });
}

void Backward(const Var& root) {
  if (root->value.Numel() != 1) {
    Fail(ErrorKind::kShape,
         "backward: root must be scalar, got " + root->value.ShapeStr());
  }
  if (!root->requires_grad) return;

  // Iterative post-order DFS; each node enters `order` exactly once, after
  // all of its grad-requiring parents have been discovered.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root->EnsureGrad().At(static_cast<size_t>(0)) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->vjp && n->HasGrad()) n->vjp(*n);
  }
}

namespace {

double MaxRelErr(const Tensor& analytic, const Tensor& numeric) {
  double worst = 0.0;
  for (size_t i = 0; i < analytic.Numel(); i++) {
    double a = analytic.At(i);
    double d = std::fabs(a - numeric.At(i)) / std::max(1.0, std::fabs(a));
    worst = std::max(worst, d);
  }
  return worst;
}

}  // namespace

double GradCheck(const std::function<Var(const Var&)>& f, const Tensor& point,
                 double step) {
  std::vector<Tensor> pts{point};
  return GradCheckMany(
      [&f](const std::vector<Var>& vs) { return f(vs[0]); }, pts, step);
}

double GradCheckMany(const std::function<Var(const std::vector<Var>&)>& f,
                     const std::vector<Tensor>& points, double step) {
  if (step <= 0.0) Fail(ErrorKind::kDomain, "grad_check: step must be > 0");
  std::vector<Var> params;
  params.reserve(points.size());
  for (const auto& p : points) params.push_back(Param(p));
  Var loss = f(params);
  if (loss->value.Numel() != 1) {
    Fail(ErrorKind::kShape, "grad_check: loss must be scalar");
  }
  Backward(loss);

  auto eval = [&](const std::vector<Var>& vs) {
    Var out = f(vs);
    double v = out->value.Item();
    if (!std::isfinite(v)) {
      Fail(ErrorKind::kNumericFault, "grad_check: non-finite loss at perturbed point");
    }
    return v;
  };

  double worst = 0.0;
  for (size_t t = 0; t < points.size(); t++) {
    Tensor analytic = params[t]->HasGrad()
                          ? params[t]->grad
                          : Tensor(points[t].Shape());
    Tensor numeric(points[t].Shape());
    std::vector<Var> probe;
    probe.reserve(points.size());
    for (const auto& p : points) probe.push_back(Constant(p));
    for (size_t i = 0; i < points[t].Numel(); i++) {
      Tensor bumped = points[t];
      bumped.At(i) += step;
      probe[t] = Constant(bumped);
      double up = eval(probe);
      bumped.At(i) -= 2.0 * step;
      probe[t] = Constant(bumped);
      double dn = eval(probe);
      numeric.At(i) = (up - dn) / (2.0 * step);
    }
    worst = std::max(worst, MaxRelErr(analytic, numeric));
  }
  return worst;
}

}  // namespace cidnst
