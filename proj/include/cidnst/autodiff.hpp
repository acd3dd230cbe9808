// cidnst/autodiff.hpp  Reverse-mode automatic differentiation on a dynamic
// graph of Tensor-valued nodes.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_AUTODIFF_HPP_
#define CIDNST_AUTODIFF_HPP_

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cidnst/tensor.hpp"

namespace cidnst {

// One recorded operation. Forward values are computed eagerly at op call
// time; each op installs a vector-Jacobian product that pulls this node's
// gradient back into its parents' accumulators. The graph is acyclic by
// construction and confined to one thread; parameter leaves may be shared
// read-only across threads for inference, since forward never mutates a node.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily; same shape as value
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> vjp;

  // A default Tensor has shape [] like a rank-0 scalar but no storage, so
  // allocation is keyed on element count as well as shape.
  bool HasGrad() const {
    return grad.Numel() == value.Numel() && grad.SameShape(value);
  }

  Tensor& EnsureGrad() {
    if (!HasGrad()) grad = Tensor(value.Shape());
    return grad;
  }
};

using Var = std::shared_ptr<Node>;

// Leaves.
Var Constant(Tensor v);
Var Param(Tensor v);  // participates in gradients

// Elementwise and linear-algebra ops. Every op checks operand shapes (shape
// mismatch names the op and shapes) and rejects non-finite outputs.
Var MatMul(const Var& a, const Var& b);           // [m,k]x[k,n] -> [m,n]
Var Add(const Var& a, const Var& b);              // same shape
Var Sub(const Var& a, const Var& b);              // same shape
Var Mul(const Var& a, const Var& b);              // elementwise, same shape
Var AddRowVec(const Var& m, const Var& v);        // [r,c] + [1,c] broadcast
Var Scale(const Var& a, double c);
Var Tanh(const Var& a);
Var Sigmoid(const Var& a);
Var SoftmaxRows(const Var& a);                    // rank 2, rowwise
Var LogSoftmaxRows(const Var& a);                 // rank 2, rowwise
Var LogsumexpRows(const Var& a);                  // [r,c] -> [r,1]
Var L1Norm(const Var& a);                         // sum |x| -> scalar
Var MeanAll(const Var& a);                        // -> scalar
Var SumAll(const Var& a);                         // -> scalar
Var Transpose(const Var& a);                      // rank 2
Var Concat(const Var& a, const Var& b, int axis); // rank 2, axis 0 or 1
Var StackRows(const std::vector<Var>& rows);      // k x [1,c] -> [k,c]
Var SliceRows(const Var& a, int r0, int r1);      // rows [r0,r1)
Var SliceCols(const Var& a, int c0, int c1);      // cols [c0,c1)
Var Reshape(const Var& a, std::vector<int> shape);
Var Embedding(const Var& table, const std::vector<int>& ids);  // rows by id
Var GatherCols(const Var& a, const std::vector<int>& ids);     // [r,1]
// Rows [t0, t0+len) replaced by the constant fill; gradient is masked there.
Var TimeMask(const Var& a, int t0, int len, double fill);
Var PadRows(const Var& a, int total_rows);        // zero rows appended

// Accumulates d(root)/d(node) into every reachable node that requires grad.
// root must be scalar. Visits each node exactly once, in reverse topological
// order; gradients from multiple consumers sum.
void Backward(const Var& root);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for a scalar-valued function of one tensor. The function must be
// deterministic; any discrete choice inside it has to be frozen by the caller.
double GradCheck(const std::function<Var(const Var&)>& f, const Tensor& point,
                 double step);

// Same, over a set of parameter tensors evaluated jointly.
double GradCheckMany(const std::function<Var(const std::vector<Var>&)>& f,
                     const std::vector<Tensor>& points, double step);

}  // namespace cidnst

#endif  // CIDNST_AUTODIFF_HPP_
