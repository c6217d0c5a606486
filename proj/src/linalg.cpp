// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#include "marglap/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace marglap {

SymEig sym_eigh(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw ShapeError("sym_eigh: matrix is not square");
  }
  double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) {
    throw ShapeError("sym_eigh: matrix is not symmetric (max asymmetry " +
                     std::to_string(asym) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Mat> solver(m);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("sym_eigh: eigendecomposition did not converge");
  }
  return SymEig{solver.eigenvalues(), solver.eigenvectors()};
}

double logdet_spd(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw ShapeError("logdet_spd: matrix is not square");
  }
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError(
        "logdet_spd: Cholesky failed, curvature is indefinite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

namespace {

// Degree-13 Pade numerator coefficients for expm.
constexpr double kPade13[] = {64764752532480000.0, 32382376266240000.0,
                              7771770303897600.0,  1187353796428800.0,
                              129060195264000.0,   10559470521600.0,
                              670442572800.0,      33522128640.0,
                              1323241920.0,        40840800.0,
                              960960.0,            16380.0,
                              182.0,               1.0};

}  // namespace

Mat expm_dense(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw ShapeError("expm_dense: matrix is not square");
  }
  const Eigen::Index n = m.rows();
  const Mat id = Mat::Identity(n, n);

  double norm = m.cwiseAbs().colwise().sum().maxCoeff();  // 1-norm
  if (norm == 0.0) {
    return id;
  }
  int squarings = 0;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  }
  Mat a = m / std::exp2(squarings);

  Mat a2 = a * a;
  Mat a4 = a2 * a2;
  Mat a6 = a4 * a2;
  Mat u = a * (a6 * (kPade13[13] * a6 + kPade13[11] * a4 + kPade13[9] * a2) +
               kPade13[7] * a6 + kPade13[5] * a4 + kPade13[3] * a2 +
               kPade13[1] * id);
  Mat v = a6 * (kPade13[12] * a6 + kPade13[10] * a4 + kPade13[8] * a2) +
          kPade13[6] * a6 + kPade13[4] * a4 + kPade13[2] * a2 +
          kPade13[0] * id;

  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) {
    r = r * r;
  }
  return r;
}

Mat3 expm3(const Mat3& m) { return Mat3(expm_dense(m)); }

std::pair<Mat3, Mat3> expm3_frechet(const Mat3& m, const Mat3& e) {
  if (m.isZero(0.0)) {
    // exp(0) = I and the derivative of exp at 0 is the identity map.
    return {Mat3::Identity(), e};
  }
  Mat block = Mat::Zero(6, 6);
  block.topLeftCorner(3, 3) = m;
  block.bottomRightCorner(3, 3) = m;
  block.topRightCorner(3, 3) = e;
  Mat big = expm_dense(block);
  return {Mat3(big.topLeftCorner(3, 3)), Mat3(big.topRightCorner(3, 3))};
}

Mat3 inv3(const Mat3& m) {
  double det = m.determinant();
  if (std::abs(det) <= 1e-12) {
    throw SingularError("inv3: matrix is singular (|det| = " +
                        std::to_string(std::abs(det)) + ")");
  }
  return m.inverse();
}

double kron_damped_logdet(const Vec& lamA, const Vec& lamG, double scale,
                          double gamma) {
  if (gamma <= 0.0) {
    throw std::domain_error("kron_damped_logdet: gamma must be > 0");
  }
  if (scale <= 0.0) {
    throw std::domain_error("kron_damped_logdet: scale must be > 0");
  }
  double out = 0.0;
  for (Eigen::Index i = 0; i < lamA.size(); ++i) {
    double la = std::max(lamA[i], 0.0);
    for (Eigen::Index j = 0; j < lamG.size(); ++j) {
      double lg = std::max(lamG[j], 0.0);
      out += std::log(scale * la * lg + gamma);
    }
  }
  return out;
}

double kron_damped_bilinear_trace(const Vec& pDiag, const Vec& qDiag,
                                  const Vec& lamA, const Vec& lamG,
                                  double scale, double gamma) {
  if (gamma <= 0.0) {
    throw std::domain_error("kron_damped_bilinear_trace: gamma must be > 0");
  }
  if (pDiag.size() != lamA.size() || qDiag.size() != lamG.size()) {
    throw ShapeError(
        "kron_damped_bilinear_trace: diagonal/eigenvalue length mismatch");
  }
  double out = 0.0;
  for (Eigen::Index i = 0; i < lamA.size(); ++i) {
    double la = std::max(lamA[i], 0.0);
    for (Eigen::Index j = 0; j < lamG.size(); ++j) {
      double lg = std::max(lamG[j], 0.0);
      out += pDiag[i] * qDiag[j] / (scale * la * lg + gamma);
    }
  }
  return out;
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

}  // namespace marglap
