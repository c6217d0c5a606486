// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "marglap/types.hpp"

namespace marglap {

/// Neumaier-compensated scalar accumulator. Adjacent +t/-t contributions
/// cancel to an exact 0 (both the sum and the compensation), which the
/// antithetic-pair invariants rely on.
struct KahanScalar {
  double s = 0.0;
  double c = 0.0;

  void add(double x) {
    double t = s + x;
    if (std::abs(s) >= std::abs(x)) {
      c += (s - t) + x;
    } else {
      c += (x - t) + s;
    }
    s = t;
  }

  double value() const { return s + c; }

  void merge(const KahanScalar& o) {
    add(o.s);
    add(o.c);
  }
};

/// Elementwise Neumaier accumulator for matrices (vectors are n-by-1).
class KahanMat {
 public:
  KahanMat() = default;
  KahanMat(Eigen::Index rows, Eigen::Index cols)
      : s_(Mat::Zero(rows, cols)), c_(Mat::Zero(rows, cols)) {}

  void add(const Mat& x) {
    Mat t = s_ + x;
    c_ += (s_.array().abs() >= x.array().abs())
              .select((s_ - t) + x, (x - t) + s_);
    s_ = t;
  }

  Mat value() const { return s_ + c_; }

  void merge(const KahanMat& o) {
    add(o.s_);
    add(o.c_);
  }

  Eigen::Index rows() const { return s_.rows(); }
  Eigen::Index cols() const { return s_.cols(); }

 private:
  Mat s_;
  Mat c_;
};

}  // namespace marglap
