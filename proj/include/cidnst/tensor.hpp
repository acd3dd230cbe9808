// cidnst/tensor.hpp  Dense row-major f64 tensor.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef CIDNST_TENSOR_HPP_
#define CIDNST_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "cidnst/common.hpp"

namespace cidnst {

// Plain value type: a shape and row-major 64-bit float storage. Rank 0 is a
// scalar, rank 1 a vector, rank 2 a matrix; nothing here needs more.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    size_t n = 1;
    for (int d : shape_) {
      if (d < 0) Fail(ErrorKind::kShape, "tensor: negative dimension");
      n *= static_cast<size_t>(d);
    }
    data_.assign(n, 0.0);
  }

  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    size_t n = 1;
    for (int d : shape_) n *= static_cast<size_t>(d);
    if (n != data_.size()) {
      Fail(ErrorKind::kShape, "tensor: data length " +
                                  std::to_string(data_.size()) +
                                  " does not match shape " + ShapeStr());
    }
  }

  static Tensor Scalar(double v) { return Tensor({}, {v}); }

  static Tensor Full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
  }

  int Rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& Shape() const { return shape_; }
  int Dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  size_t Numel() const { return data_.size(); }

  // Matrix accessors; Rows/Cols also accept rank-1 (n: treated as n x 1) so
  // reductions can stay generic.
  int Rows() const {
    if (Rank() == 2) return shape_[0];
    if (Rank() == 1) return shape_[0];
    if (Rank() == 0) return 1;
    Fail(ErrorKind::kShape, "tensor: Rows() on rank " + std::to_string(Rank()));
  }
  int Cols() const {
    if (Rank() == 2) return shape_[1];
    if (Rank() == 1) return 1;
    if (Rank() == 0) return 1;
    Fail(ErrorKind::kShape, "tensor: Cols() on rank " + std::to_string(Rank()));
  }

  double* Data() { return data_.data(); }
  const double* Data() const { return data_.data(); }
  std::vector<double>& Vec() { return data_; }
  const std::vector<double>& Vec() const { return data_; }

  double& At(size_t i) { return data_[i]; }
  double At(size_t i) const { return data_[i]; }
  double& At(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  double At(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }

  double Item() const {
    if (Numel() != 1) {
      Fail(ErrorKind::kShape, "tensor: Item() on shape " + ShapeStr());
    }
    return data_[0];
  }

  bool AllFinite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  std::string ShapeStr() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); i++) {
      if (i) os << "x";
      os << shape_[i];
    }
    os << "]";
    return os.str();
  }

  bool SameShape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace cidnst

#endif  // CIDNST_TENSOR_HPP_
