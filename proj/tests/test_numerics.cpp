// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <vector>

#include "cidnst/autodiff.hpp"
#include "doctest.h"

using namespace cidnst;

namespace {

Tensor RandomTensor(std::vector<int> shape, Rng* rng, double lo = -1.5,
                    double hi = 1.5) {
  Tensor t(std::move(shape));
  for (double& x : t.Vec()) x = rng->Uniform(lo, hi);
  return t;
}

// Random values bounded away from zero, for ops with a kink at 0.
Tensor RandomSigned(std::vector<int> shape, Rng* rng) {
  Tensor t(std::move(shape));
  for (double& x : t.Vec()) {
    double m = rng->Uniform(0.3, 1.4);
    x = rng->Uniform() < 0.5 ? -m : m;
  }
  return t;
}

}  // namespace

TEST_CASE("tensor shape and data must agree") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), Error);
  Tensor t({2, 3});
  CHECK(t.Numel() == 6);
  CHECK(t.ShapeStr() == "[2x3]");
  CHECK(Tensor::Scalar(4.0).Item() == 4.0);
}

TEST_CASE("square of 3 has value 9 and gradient 6") {
  Var x = Param(Tensor::Scalar(3.0));
  Var y = Mul(x, x);
  CHECK(y->value.Item() == doctest::Approx(9.0).epsilon(1e-12));
  Backward(y);
  CHECK(x->grad.Item() == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("l1norm gradient at (2,-3) is (1,-1), and 0 at 0") {
  Var v = Param(Tensor({3}, {2.0, -3.0, 0.0}));
  Var y = L1Norm(v);
  CHECK(y->value.Item() == doctest::Approx(5.0));
  Backward(y);
  CHECK(v->grad.At(static_cast<size_t>(0)) == 1.0);
  CHECK(v->grad.At(static_cast<size_t>(1)) == -1.0);
  CHECK(v->grad.At(static_cast<size_t>(2)) == 0.0);
}

TEST_CASE("logsoftmax NLL gradient equals softmax minus one-hot") {
  Rng rng(DeriveSeed(7, "nll"));
  Tensor logits = RandomTensor({1, 5}, &rng);
  const int target = 3;

  auto nll = [&](const Var& x) {
    Var lp = LogSoftmaxRows(x);
    return Scale(GatherCols(lp, {target}), -1.0);
  };
  Var x = Param(logits);
  Var loss = nll(x);
  Backward(loss);

  // Closed form: softmax(logits) - onehot(target).
  Var sm = SoftmaxRows(Constant(logits));
  for (int j = 0; j < 5; j++) {
    double expect = sm->value.At(0, j) - (j == target ? 1.0 : 0.0);
    CHECK(x->grad.At(0, j) == doctest::Approx(expect).epsilon(1e-10));
  }
  CHECK(GradCheck(nll, logits, 1e-5) <= 1e-7);
}

TEST_CASE("grad_check on a quadratic form is at most 1e-7") {
  Rng rng(DeriveSeed(7, "quad"));
  Tensor a = RandomTensor({8, 8}, &rng);
  Tensor x0 = RandomTensor({8, 1}, &rng);
  auto f = [&](const Var& x) {
    return SumAll(MatMul(Transpose(x), MatMul(Constant(a), x)));
  };
  CHECK(GradCheck(f, x0, 1e-5) <= 1e-7);
}

TEST_CASE("grad_check on a constant function returns 0") {
  auto f = [](const Var& x) {
    (void)x;
    return Constant(Tensor::Scalar(2.5));
  };
  CHECK(GradCheck(f, Tensor({4}, {1.0, 2.0, 3.0, 4.0}), 1e-5) == 0.0);
}

TEST_CASE("shared subgraph accumulates gradients from all consumers") {
  Var x = Param(Tensor({2}, {1.5, -0.5}));
  Var s = Mul(x, x);
  Var loss = SumAll(Add(s, s));  // 2*x^2 summed; d/dx = 4x
  Backward(loss);
  CHECK(x->grad.At(static_cast<size_t>(0)) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(x->grad.At(static_cast<size_t>(1)) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("shape mismatch raises a structured error naming the op") {
  Var a = Constant(Tensor({2, 3}));
  Var b = Constant(Tensor({3, 3}));
  try {
    (void)Add(a, b);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
    CHECK(std::string(e.what()).find("add") != std::string::npos);
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("non-finite output raises a numeric fault") {
  Var big = Constant(Tensor::Scalar(1e308));
  try {
    (void)Mul(big, big);
    FAIL("expected numeric fault");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumericFault);
  }
}

TEST_CASE("backward requires a scalar root") {
  Var x = Param(Tensor({2, 2}));
  CHECK_THROWS_AS(Backward(Add(x, x)), Error);
}

TEST_CASE("op outputs are deterministic") {
  Rng r1(DeriveSeed(11, "det"));
  Rng r2(DeriveSeed(11, "det"));
  Tensor a1 = RandomTensor({4, 4}, &r1), a2 = RandomTensor({4, 4}, &r2);
  Var y1 = SoftmaxRows(Constant(a1));
  Var y2 = SoftmaxRows(Constant(a2));
  CHECK(y1->value.Vec() == y2->value.Vec());
}

TEST_CASE("every op matches central finite differences within 1e-4") {
  Rng rng(DeriveSeed(7, "ops"));
  const double kStep = 1e-5;
  const double kTol = 1e-4;

  // Fixed cotangent mixers so the scalarization exercises off-diagonal terms.
  Tensor c34 = RandomTensor({3, 4}, &rng);
  Tensor c43 = RandomTensor({4, 3}, &rng);
  Tensor c31 = RandomTensor({3, 1}, &rng);
  Tensor c24 = RandomTensor({2, 4}, &rng);
  Tensor c64 = RandomTensor({6, 4}, &rng);
  Tensor c32 = RandomTensor({3, 2}, &rng);
  Tensor c14 = RandomTensor({1, 4}, &rng);
  Tensor b43 = RandomTensor({4, 3}, &rng);
  Tensor a34 = RandomTensor({3, 4}, &rng);

  auto mix = [](const Var& y, const Tensor& c) {
    return SumAll(Mul(y, Constant(c)));
  };

  Tensor p34 = RandomTensor({3, 4}, &rng);

  SUBCASE("matmul lhs") {
    Tensor c33 = RandomTensor({3, 3}, &rng);
    CHECK(GradCheck([&](const Var& x) { return mix(MatMul(x, Constant(b43)), c33); }, p34, kStep) <= kTol);
  }
  SUBCASE("matmul rhs") {
    Tensor p43 = RandomTensor({4, 3}, &rng);
    CHECK(GradCheck([&](const Var& x) { return SumAll(MatMul(Constant(a34), x)); }, p43, kStep) <= kTol);
  }
  SUBCASE("add") {
    CHECK(GradCheck([&](const Var& x) { return mix(Add(x, Constant(a34)), c34); }, p34, kStep) <= kTol);
  }
  SUBCASE("sub") {
    CHECK(GradCheck([&](const Var& x) { return mix(Sub(Constant(a34), x), c34); }, p34, kStep) <= kTol);
  }
  SUBCASE("mul") {
    CHECK(GradCheck([&](const Var& x) { return mix(Mul(x, Constant(a34)), c34); }, p34, kStep) <= kTol);
  }
  SUBCASE("add_rowvec matrix side") {
    CHECK(GradCheck([&](const Var& x) { return mix(AddRowVec(x, Constant(c14)), c34); }, p34, kStep) <= kTol);
  }
  SUBCASE("add_rowvec vector side") {
    Tensor v = RandomTensor({1, 4}, &rng);
    CHECK(GradCheck([&](const Var& x) { return mix(AddRowVec(Constant(p34), x), c34); }, v, kStep) <= kTol);
  }
  SUBCASE("scale") {
    CHECK(GradCheck([&](const Var& x) { return mix(Scale(x, -2.25), c34); }, p34, kStep) <= kTol);
  }
  SUBCASE("tanh") {
    CHECK(GradCheck([&](const Var& x) { return mix(Tanh(x), c34); }, p34, kStep) <= kTol);
  }
  SUBCASE("sigmoid") {
    CHECK(GradCheck([&](const Var& x) { return mix(Sigmoid(x), c34); }, p34, kStep) <= kTol);
  }
  SUBCASE("softmax") {
    CHECK(GradCheck([&](const Var& x) { return mix(SoftmaxRows(x), c34); }, p34, kStep) <= kTol);
  }
  SUBCASE("log_softmax") {
    CHECK(GradCheck([&](const Var& x) { return mix(LogSoftmaxRows(x), c34); }, p34, kStep) <= kTol);
  }
  SUBCASE("logsumexp") {
    CHECK(GradCheck([&](const Var& x) { return mix(LogsumexpRows(x), c31); }, p34, kStep) <= kTol);
  }
  SUBCASE("l1norm") {
    Tensor p = RandomSigned({3, 4}, &rng);
    CHECK(GradCheck([&](const Var& x) { return L1Norm(x); }, p, kStep) <= kTol);
  }
  SUBCASE("mean") {
    CHECK(GradCheck([&](const Var& x) { return MeanAll(x); }, p34, kStep) <= kTol);
  }
  SUBCASE("sum") {
    CHECK(GradCheck([&](const Var& x) { return SumAll(x); }, p34, kStep) <= kTol);
  }
  SUBCASE("transpose") {
    CHECK(GradCheck([&](const Var& x) { return mix(Transpose(x), c43); }, p34, kStep) <= kTol);
  }
  SUBCASE("concat axis 0") {
    CHECK(GradCheck([&](const Var& x) { return mix(Concat(x, Constant(a34), 0), c64); }, p34, kStep) <= kTol);
  }
  SUBCASE("concat axis 1") {
    Tensor c38 = RandomTensor({3, 8}, &rng);
    CHECK(GradCheck([&](const Var& x) { return mix(Concat(Constant(a34), x, 1), c38); }, p34, kStep) <= kTol);
  }
  SUBCASE("stack_rows") {
    Tensor row = RandomTensor({1, 4}, &rng);
    Tensor cmix = RandomTensor({3, 4}, &rng);
    auto f = [&](const Var& x) {
      std::vector<Var> rows{x, Constant(c14), x};  // shared row: grads add
      return mix(StackRows(rows), cmix);
    };
    CHECK(GradCheck(f, row, kStep) <= kTol);
  }
  SUBCASE("slice_rows") {
    CHECK(GradCheck([&](const Var& x) { return mix(SliceRows(x, 1, 3), c24); }, p34, kStep) <= kTol);
  }
  SUBCASE("slice_cols") {
    CHECK(GradCheck([&](const Var& x) { return mix(SliceCols(x, 1, 3), c32); }, p34, kStep) <= kTol);
  }
  SUBCASE("reshape") {
    Tensor c26 = RandomTensor({2, 6}, &rng);
    CHECK(GradCheck([&](const Var& x) { return mix(Reshape(x, {2, 6}), c26); }, p34, kStep) <= kTol);
  }
  SUBCASE("embedding") {
    Tensor table = RandomTensor({5, 4}, &rng);
    std::vector<int> ids{0, 3, 3, 1};
    Tensor cmix = RandomTensor({4, 4}, &rng);
    CHECK(GradCheck([&](const Var& x) { return mix(Embedding(x, ids), cmix); }, table, kStep) <= kTol);
  }
  SUBCASE("gather_cols") {
    std::vector<int> ids{2, 0, 3};
    CHECK(GradCheck([&](const Var& x) { return mix(GatherCols(x, ids), c31); }, p34, kStep) <= kTol);
  }
  SUBCASE("time_mask") {
    CHECK(GradCheck([&](const Var& x) { return mix(TimeMask(x, 1, 1, 0.37), c34); }, p34, kStep) <= kTol);
  }
  SUBCASE("pad_rows") {
    CHECK(GradCheck([&](const Var& x) { return mix(PadRows(x, 6), c64); }, p34, kStep) <= kTol);
  }
}

TEST_CASE("embedding rejects out-of-vocabulary ids") {
  Var table = Constant(Tensor({4, 2}));
  try {
    (void)Embedding(table, {0, 4});
    FAIL("expected vocab error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kVocab);
  }
}

TEST_CASE("seed derivation is stable and tag-sensitive") {
  CHECK(DeriveSeed(42, "corpus") == DeriveSeed(42, "corpus"));
  CHECK(DeriveSeed(42, "corpus") != DeriveSeed(42, "m0"));
  CHECK(DeriveSeed(42, "corpus") != DeriveSeed(43, "corpus"));
  Rng a(DeriveSeed(1, "x")), b(DeriveSeed(1, "x"));
  for (int i = 0; i < 16; i++) CHECK(a.Normal() == b.Normal());
}
