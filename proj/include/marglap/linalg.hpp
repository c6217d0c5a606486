// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>

#include "marglap/types.hpp"

namespace marglap {

/// Eigendecomposition of a symmetric matrix: m = V diag(lambda) V^T,
/// eigenvalues ascending, eigenvectors orthonormal in columns.
struct SymEig {
  Vec eigenvalues;
  Mat eigenvectors;
};

/// Symmetric eigendecomposition. Input must be square and symmetric within
/// 1e-10 absolute; throws ShapeError otherwise.
SymEig sym_eigh(const Mat& m);

/// log|m| for symmetric positive-definite m, via Cholesky:
/// 2 * sum(log(diag(L))). Throws NotPositiveDefiniteError when the
/// factorization fails (indefinite curvature; caller should damp).
double logdet_spd(const Mat& m);

/// Matrix exponential of a small dense matrix by scaling-and-squaring with a
/// degree-13 Pade kernel (squarings chosen so the scaled 1-norm is <= 0.5).
Mat expm_dense(const Mat& m);

/// exp(m) for 3x3 matrices.
Mat3 expm3(const Mat3& m);

/// (exp(m), L(m,e)) where L is the directional (Frechet) derivative of exp at
/// m in direction e, via the block identity
///   exp([[m, e], [0, m]]) = [[exp(m), L], [0, exp(m)]].
std::pair<Mat3, Mat3> expm3_frechet(const Mat3& m, const Mat3& e);

/// Inverse of a 3x3 matrix; throws SingularError when |det m| <= 1e-12.
Mat3 inv3(const Mat3& m);

/// log|scale * (A kron G) + gamma * I| from the eigenvalues of the factors:
///   sum_i sum_j log(scale * lamA_i * lamG_j + gamma).
/// Eigenvalues are clamped at 0 (accumulated factors are PSD; small negative
/// values are rounding noise). gamma and scale must be > 0.
double kron_damped_logdet(const Vec& lamA, const Vec& lamG, double scale,
                          double gamma);

/// sum_i sum_j pDiag_i * qDiag_j / (scale * lamA_i * lamG_j + gamma).
/// With pDiag = diag(V_A^T X V_A) and qDiag = diag(V_G^T Y V_G) this equals
/// tr[(scale * A kron G + gamma I)^-1 (X kron Y)].
double kron_damped_bilinear_trace(const Vec& pDiag, const Vec& qDiag,
                                  const Vec& lamA, const Vec& lamG,
                                  double scale, double gamma);

/// Kronecker product, for test oracles and small dense assemblies.
Mat kron(const Mat& a, const Mat& b);

}  // namespace marglap
