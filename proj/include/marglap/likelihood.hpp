// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "marglap/types.hpp"

namespace marglap {

/// softmax(f), computed with max-shift stabilization.
Vec softmax(const Vec& f);

/// -log softmax(f)[y]. Throws ShapeError for y out of range.
double nll(const Vec& f, int y);

/// Gradient of nll w.r.t. the logits: softmax(f) - onehot(y).
Vec nll_grad(const Vec& f, int y);

/// Hessian of -log p(y|f) w.r.t. the logits: diag(p) - p p^T with
/// p = softmax(f). Independent of y; symmetric PSD; rows sum to 0.
Mat lambda(const Vec& f);

/// Directional derivative of lambda at f along df:
/// with dp = lambda(f) * df, returns diag(dp) - dp p^T - p dp^T.
Mat lambda_tangent(const Vec& f, const Vec& df);

}  // namespace marglap
