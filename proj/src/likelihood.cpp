// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#include "marglap/likelihood.hpp"

#include <cmath>

namespace marglap {

Vec softmax(const Vec& f) {
  Vec shifted = f.array() - f.maxCoeff();
  Vec e = shifted.array().exp();
  return e / e.sum();
}

double nll(const Vec& f, int y) {
  if (y < 0 || y >= f.size()) {
    throw ShapeError("nll: class index out of range");
  }
  double m = f.maxCoeff();
  double lse = m + std::log((f.array() - m).exp().sum());
  return lse - f[y];
}

Vec nll_grad(const Vec& f, int y) {
  if (y < 0 || y >= f.size()) {
    throw ShapeError("nll_grad: class index out of range");
  }
  Vec g = softmax(f);
  g[y] -= 1.0;
  return g;
}

Mat lambda(const Vec& f) {
  Vec p = softmax(f);
  Mat out = Mat(p.asDiagonal()) - p * p.transpose();
  return out;
}

Mat lambda_tangent(const Vec& f, const Vec& df) {
  Vec p = softmax(f);
  Vec dp = lambda(f) * df;
  return Mat(dp.asDiagonal()) - dp * p.transpose() - p * dp.transpose();
}

}  // namespace marglap
