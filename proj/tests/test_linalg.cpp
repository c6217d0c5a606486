// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "marglap/augment.hpp"
#include "marglap/linalg.hpp"
#include "marglap/rng.hpp"

using namespace marglap;

namespace {

Mat random_mat(RngStream& rng, int r, int c, double scale = 1.0) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.uniform_pm1();
  return m;
}

Mat random_sym(RngStream& rng, int n, double scale = 1.0) {
  Mat m = random_mat(rng, n, n, scale);
  return 0.5 * (m + m.transpose());
}

Mat random_spd(RngStream& rng, int n) {
  Mat m = random_mat(rng, n, n);
  return m * m.transpose() + 0.1 * Mat::Identity(n, n);
}

// Truncated-series oracle for the matrix exponential.
Mat expm_taylor(const Mat& m, int terms) {
  Mat acc = Mat::Identity(m.rows(), m.cols());
  Mat term = acc;
  for (int n = 1; n <= terms; ++n) {
    term = term * m / static_cast<double>(n);
    acc += term;
  }
  return acc;
}

}  // namespace

TEST_CASE("sym_eigh identity and diagonal") {
  SymEig e = sym_eigh(Mat::Identity(3, 3));
  CHECK(e.eigenvalues.isApprox(Vec::Ones(3)));
  Mat d = Vec2(2.0, 5.0).asDiagonal();
  SymEig e2 = sym_eigh(d);
  CHECK(e2.eigenvalues[0] == doctest::Approx(2.0));
  CHECK(e2.eigenvalues[1] == doctest::Approx(5.0));
  CHECK(std::abs(e2.eigenvectors(0, 0)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eigh reconstructs random symmetric input") {
  RngStream rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    Mat m = random_sym(rng, 6);
    SymEig e = sym_eigh(m);
    Mat rec = e.eigenvectors * e.eigenvalues.asDiagonal() *
              e.eigenvectors.transpose();
    CHECK((rec - m).norm() / m.norm() < 1e-9);
    CHECK((e.eigenvectors.transpose() * e.eigenvectors -
           Mat::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
    // ascending order
    for (int i = 1; i < 6; ++i) {
      CHECK(e.eigenvalues[i] >= e.eigenvalues[i - 1]);
    }
  }
}

TEST_CASE("sym_eigh rejects bad input") {
  CHECK_THROWS_AS(sym_eigh(Mat::Zero(2, 3)), ShapeError);
  Mat m(2, 2);
  m << 1.0, 0.5, 0.2, 1.0;
  CHECK_THROWS_AS(sym_eigh(m), ShapeError);
}

TEST_CASE("logdet_spd basics") {
  CHECK(logdet_spd(Mat::Identity(4, 4)) == doctest::Approx(0.0));
  Mat d = Vec2(2.0, 2.0).asDiagonal();
  CHECK(logdet_spd(d) == doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("logdet_spd matches eigenvalue oracle") {
  RngStream rng(5);
  Mat m = random_spd(rng, 8);
  SymEig e = sym_eigh(m);
  double oracle = e.eigenvalues.array().log().sum();
  CHECK(logdet_spd(m) == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("logdet_spd equals sum of log-eigenvalues for sizes up to 12") {
  RngStream rng(17);
  for (int n = 1; n <= 12; ++n) {
    Mat m = random_spd(rng, n);
    double oracle = sym_eigh(m).eigenvalues.array().log().sum();
    CHECK(logdet_spd(m) == doctest::Approx(oracle).epsilon(1e-8));
  }
}

TEST_CASE("logdet_spd signals indefinite input") {
  Mat m = -Mat::Identity(3, 3);
  CHECK_THROWS_AS(logdet_spd(m), NotPositiveDefiniteError);
}

TEST_CASE("expm3 zero and quarter-turn rotation") {
  CHECK(expm3(Mat3::Zero()) == Mat3::Identity());
  Mat3 g3 = affine_generators()[2];
  Mat3 r = expm3(M_PI / 2.0 * g3);
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((r - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("expm3 matches truncated-series oracle") {
  RngStream rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    Mat m = random_mat(rng, 3, 3, 0.4);  // ||m|| <= ~1
    Mat truth = expm_taylor(m, 30);
    CHECK((Mat(expm3(Mat3(m))) - truth).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("expm3 inverse identity for moderate norms") {
  RngStream rng(29);
  for (int rep = 0; rep < 10; ++rep) {
    Mat3 a = Mat3(random_mat(rng, 3, 3, 1.6));  // ||a|| up to ~5
    Mat3 prod = expm3(a) * expm3(Mat3(-a));
    CHECK((prod - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("expm3 one-parameter subgroup property per generator") {
  RngStream rng(31);
  for (const Mat3& g : affine_generators()) {
    double s = rng.uniform(-1.5, 1.5);
    double t = rng.uniform(-1.5, 1.5);
    Mat3 lhs = expm3(Mat3((s + t) * g));
    Mat3 rhs = expm3(Mat3(s * g)) * expm3(Mat3(t * g));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("expm3 accuracy up to norm 10") {
  RngStream rng(37);
  Mat m = random_mat(rng, 3, 3, 3.2);
  // scaling-and-squaring vs series on the pre-scaled matrix
  Mat truth = expm_taylor(m / 16.0, 40);
  for (int i = 0; i < 4; ++i) truth = truth * truth;
  CHECK((Mat(expm3(Mat3(m))) - truth).norm() / truth.norm() < 1e-12);
}

TEST_CASE("expm3_frechet at zero") {
  Mat3 g3 = affine_generators()[2];
  auto [t0, l0] = expm3_frechet(Mat3::Zero(), g3);
  CHECK(t0 == Mat3::Identity());
  CHECK(l0 == g3);
  auto [t1, l1] = expm3_frechet(Mat3::Zero(), Mat3::Zero());
  CHECK(l1 == Mat3::Zero());
}

TEST_CASE("expm3_frechet matches central finite differences") {
  RngStream rng(41);
  const double h = 1e-6;
  for (int rep = 0; rep < 10; ++rep) {
    Mat3 m = Mat3(random_mat(rng, 3, 3, 0.8));
    Mat3 e = Mat3(random_mat(rng, 3, 3, 0.8));
    auto [t, l] = expm3_frechet(m, e);
    CHECK((t - expm3(m)).cwiseAbs().maxCoeff() < 1e-12);
    Mat3 fd = (expm3(Mat3(m + h * e)) - expm3(Mat3(m - h * e))) / (2.0 * h);
    CHECK((l - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("inv3 basics and singularity") {
  CHECK(inv3(Mat3::Identity()) == Mat3::Identity());
  Mat3 r = expm3(Mat3(0.7 * affine_generators()[2]));
  CHECK((inv3(r) - r.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  RngStream rng(43);
  Mat3 m = Mat3(random_mat(rng, 3, 3));
  CHECK((m * inv3(m) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-10);
  Mat3 defective = Mat3::Zero();
  defective(0, 0) = 1.0;
  CHECK_THROWS_AS(inv3(defective), SingularError);
}

TEST_CASE("kron_damped_logdet closed forms") {
  Vec lamA2 = Vec::Ones(2), lamG3 = Vec::Ones(3);
  // identity Kronecker with vanishing damping: log(1 + gamma) -> 0
  CHECK(kron_damped_logdet(lamA2, lamG3, 1.0, 1e-300) ==
        doctest::Approx(0.0).epsilon(1e-12));
  Vec one = Vec::Ones(1);
  CHECK(kron_damped_logdet(one, one, 1.0, 1.0) ==
        doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(kron_damped_logdet(one, one, 1.0, 0.0), std::domain_error);
}

TEST_CASE("kron_damped_logdet matches dense oracle on random factors") {
  RngStream rng(47);
  Mat A = random_spd(rng, 3);
  Mat G = random_spd(rng, 4);
  double scale = 0.37, gamma = 0.21;
  Mat dense = scale * kron(A, G) + gamma * Mat::Identity(12, 12);
  double expected = logdet_spd(dense);
  double got = kron_damped_logdet(sym_eigh(A).eigenvalues,
                                  sym_eigh(G).eigenvalues, scale, gamma);
  CHECK(got == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("kron_damped_logdet is symmetric in the factors") {
  RngStream rng(53);
  Vec lamA = random_mat(rng, 3, 1).cwiseAbs();
  Vec lamG = random_mat(rng, 5, 1).cwiseAbs();
  CHECK(kron_damped_logdet(lamA, lamG, 0.5, 0.3) ==
        doctest::Approx(kron_damped_logdet(lamG, lamA, 0.5, 0.3)));
}

TEST_CASE("kron logdet limit: gamma -> 0 splits into factor logdets") {
  RngStream rng(59);
  Mat A = random_spd(rng, 3);
  Mat G = random_spd(rng, 4);
  double lhs = kron_damped_logdet(sym_eigh(A).eigenvalues,
                                  sym_eigh(G).eigenvalues, 1.0, 1e-300);
  double rhs = G.rows() * logdet_spd(A) + A.rows() * logdet_spd(G);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
}

TEST_CASE("kron_damped_bilinear_trace closed forms") {
  // pure damping
  Vec zero1 = Vec::Zero(1), one1 = Vec::Ones(1);
  CHECK(kron_damped_bilinear_trace(one1, one1, zero1, zero1, 1.0, 1.0) ==
        doctest::Approx(1.0));
  // self-trace: sum d/(d+gamma) over Kronecker eigenvalues d
  RngStream rng(61);
  Vec lamA = random_mat(rng, 3, 1).cwiseAbs();
  Vec lamG = random_mat(rng, 4, 1).cwiseAbs();
  double scale = 1.0 / 7.0, gamma = 0.4;
  double got = kron_damped_bilinear_trace(lamA, lamG, lamA, lamG, scale, gamma);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      double d = lamA[i] * lamG[j];
      expected += d / (scale * d + gamma);
    }
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(
      kron_damped_bilinear_trace(Vec::Ones(2), one1, one1, one1, 1.0, 1.0),
      ShapeError);
}

TEST_CASE("kron_damped_bilinear_trace matches dense trace oracle") {
  RngStream rng(67);
  Mat A = random_spd(rng, 3);
  Mat G = random_spd(rng, 4);
  Mat X = random_sym(rng, 3);
  Mat Y = random_sym(rng, 4);
  double scale = 0.29, gamma = 0.17;
  Mat dense = scale * kron(A, G) + gamma * Mat::Identity(12, 12);
  double expected = (dense.ldlt().solve(kron(X, Y))).trace();
  SymEig ea = sym_eigh(A), eg = sym_eigh(G);
  Vec p = (ea.eigenvectors.transpose() * X * ea.eigenvectors).diagonal();
  Vec q = (eg.eigenvectors.transpose() * Y * eg.eigenvectors).diagonal();
  double got = kron_damped_bilinear_trace(p, q, ea.eigenvalues, eg.eigenvalues,
                                          scale, gamma);
  CHECK(got == doctest::Approx(expected).epsilon(1e-8));
}
