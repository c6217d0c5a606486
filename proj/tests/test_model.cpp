// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "marglap/kahan.hpp"
#include "marglap/linalg.hpp"
#include "marglap/model.hpp"
#include "marglap/rng.hpp"

using namespace marglap;

namespace {

MlpModel random_model(int in, std::vector<int> hidden, int out,
                      Activation act, uint64_t seed) {
  RngStream rng(seed);
  return MlpModel::init(in, hidden, out, act, rng);
}

Vec random_vec(RngStream& rng, int n, double scale = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.uniform_pm1();
  return v;
}

// Straightforward duplicate-path oracle for the forward pass.
Vec forward_naive(const MlpModel& m, const Vec& x) {
  Vec a = x;
  for (const auto& layer : m.layers) {
    Vec s(layer.out_dim());
    for (int i = 0; i < layer.out_dim(); ++i) {
      double acc = layer.b[i];
      for (int j = 0; j < layer.in_dim(); ++j) acc += layer.W(i, j) * a[j];
      s[i] = acc;
    }
    switch (layer.act) {
      case Activation::Tanh:
        for (int i = 0; i < s.size(); ++i) s[i] = std::tanh(s[i]);
        break;
      case Activation::Relu:
        for (int i = 0; i < s.size(); ++i) s[i] = std::max(0.0, s[i]);
        break;
      case Activation::Identity:
        break;
    }
    a = s;
  }
  return a;
}

// Recompute the logits from a perturbed pre-activation of layer l.
Vec forward_from_preact(const MlpModel& m, const ForwardTrace& trace, int l,
                        const Vec& s_l) {
  Vec a = s_l;
  switch (m.layers[l].act) {
    case Activation::Tanh: a = a.array().tanh(); break;
    case Activation::Relu: a = a.cwiseMax(0.0); break;
    case Activation::Identity: break;
  }
  for (int j = l + 1; j < m.num_layers(); ++j) {
    Vec s = m.layers[j].W * a + m.layers[j].b;
    switch (m.layers[j].act) {
      case Activation::Tanh: a = s.array().tanh(); break;
      case Activation::Relu: a = s.cwiseMax(0.0); break;
      case Activation::Identity: a = s; break;
    }
  }
  return a;
}

}  // namespace

TEST_CASE("forward closed forms") {
  MlpModel zero = random_model(3, {4}, 2, Activation::Tanh, 1);
  for (auto& l : zero.layers) {
    l.W.setZero();
    l.b.setZero();
  }
  RngStream rng(2);
  CHECK(forward(zero, random_vec(rng, 3)) == Vec::Zero(2));

  MlpModel ident;
  DenseLayer layer;
  layer.W = Mat::Identity(3, 3);
  layer.b = Vec::Zero(3);
  layer.act = Activation::Identity;
  ident.layers.push_back(layer);
  Vec x = random_vec(rng, 3);
  CHECK(forward(ident, x) == x);

  CHECK_THROWS_AS(forward(ident, Vec::Zero(4)), ShapeError);
}

TEST_CASE("forward matches an independent re-implementation") {
  MlpModel m = random_model(4, {7, 5}, 3, Activation::Tanh, 3);
  RngStream rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    Vec x = random_vec(rng, 4, 2.0);
    CHECK((forward(m, x) - forward_naive(m, x)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("flatten/unflatten round-trips") {
  MlpModel m = random_model(3, {5}, 2, Activation::Tanh, 5);
  Vec theta = m.flatten();
  CHECK(theta.size() == m.param_count());
  MlpModel m2 = m;
  for (auto& l : m2.layers) {
    l.W.setZero();
    l.b.setZero();
  }
  m2.unflatten(theta);
  RngStream rng(6);
  Vec x = random_vec(rng, 3);
  CHECK(forward(m, x) == forward(m2, x));
}

TEST_CASE("back_grads closed forms") {
  MlpModel m = random_model(3, {4}, 2, Activation::Identity, 7);
  ForwardTrace trace;
  RngStream rng(8);
  forward(m, random_vec(rng, 3), &trace);
  LayerBackGrads bg = back_grads(m, trace);
  CHECK(bg.g[1] == Mat::Identity(2, 2));
  // linear two-layer network: g_1 = W_2^T
  CHECK((bg.g[0] - m.layers[1].W.transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("back_grads matches finite differences of the logits") {
  MlpModel m = random_model(3, {5, 4}, 2, Activation::Tanh, 9);
  RngStream rng(10);
  Vec x = random_vec(rng, 3);
  ForwardTrace trace;
  forward(m, x, &trace);
  LayerBackGrads bg = back_grads(m, trace);
  const double h = 1e-6;
  for (int l = 0; l < m.num_layers(); ++l) {
    for (int i = 0; i < m.layers[l].out_dim(); ++i) {
      Vec sp = trace.preacts[l], sm = trace.preacts[l];
      sp[i] += h;
      sm[i] -= h;
      Vec fd = (forward_from_preact(m, trace, l, sp) -
                forward_from_preact(m, trace, l, sm)) / (2.0 * h);
      for (int c = 0; c < 2; ++c) {
        CHECK(bg.g[l](i, c) == doctest::Approx(fd[c]).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("jacobian_params block structure for a single linear layer") {
  MlpModel m = random_model(3, {}, 2, Activation::Identity, 11);
  RngStream rng(12);
  Vec x = random_vec(rng, 3);
  Mat J = jacobian_params(m, x);
  CHECK(J.rows() == 2);
  CHECK(J.cols() == 8);
  // column j*2+i equals x[j] on row i (bias column: 1)
  for (int j = 0; j < 4; ++j) {
    double aj = j < 3 ? x[j] : 1.0;
    for (int i = 0; i < 2; ++i) {
      for (int c = 0; c < 2; ++c) {
        CHECK(J(c, j * 2 + i) == doctest::Approx(c == i ? aj : 0.0));
      }
    }
  }
}

TEST_CASE("jacobian_params zero input zeroes first-layer weight columns") {
  MlpModel m = random_model(3, {4}, 2, Activation::Tanh, 13);
  Mat J = jacobian_params(m, Vec::Zero(3));
  // first-layer weight columns are j*4+i for j<3
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 4; ++i)
      CHECK(J.col(j * 4 + i).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("jacobian_params matches a parameter perturbation") {
  MlpModel m = random_model(4, {6, 5}, 3, Activation::Tanh, 14);
  RngStream rng(15);
  Vec x = random_vec(rng, 4);
  Mat J = jacobian_params(m, x);
  Vec theta = m.flatten();
  Vec delta = random_vec(rng, m.param_count());
  const double h = 1e-6;
  MlpModel mp = m, mm = m;
  mp.unflatten(theta + h * delta);
  mm.unflatten(theta - h * delta);
  Vec fd = (forward(mp, x) - forward(mm, x)) / (2.0 * h);
  Vec pred = J * delta;
  CHECK((fd - pred).cwiseAbs().maxCoeff() /
            std::max(1.0, pred.cwiseAbs().maxCoeff()) < 1e-6);
}

TEST_CASE("per-sample layer block equals the Kronecker arrangement") {
  // Pins the vec ordering: layer block of J^T Lambda J must equal
  // (a-tilde a-tilde^T) kron (g Lambda g^T) -- checked here at the level of
  // J itself: row c of the block is a-tilde kron g[:, c].
  MlpModel m = random_model(3, {4, 3}, 2, Activation::Tanh, 16);
  RngStream rng(17);
  Vec x = random_vec(rng, 3);
  ForwardTrace trace;
  forward(m, x, &trace);
  LayerBackGrads bg = back_grads(m, trace);
  Mat J = jacobian_params(m, x);
  for (int l = 0; l < m.num_layers(); ++l) {
    const int g = m.layers[l].out_dim();
    const int d = m.layers[l].in_dim();
    Vec atilde(d + 1);
    atilde.head(d) = trace.inputs[l];
    atilde[d] = 1.0;
    Mat block = J.block(0, m.layer_param_offset(l), 2, (d + 1) * g);
    for (int c = 0; c < 2; ++c) {
      Mat kr = kron(atilde.transpose(), bg.g[l].col(c).transpose());
      CHECK((block.row(c) - kr.row(0)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("input_jvp closed forms and finite differences") {
  MlpModel lin = random_model(3, {4}, 2, Activation::Identity, 18);
  RngStream rng(19);
  ForwardTrace trace;
  Vec x = random_vec(rng, 3);
  forward(lin, x, &trace);
  Vec dx = random_vec(rng, 3);
  CHECK(input_jvp(lin, trace, Vec::Zero(3)) == Vec::Zero(2));
  Vec expect = lin.layers[1].W * (lin.layers[0].W * dx);
  CHECK((input_jvp(lin, trace, dx) - expect).cwiseAbs().maxCoeff() < 1e-14);

  MlpModel m = random_model(3, {6, 4}, 2, Activation::Tanh, 20);
  forward(m, x, &trace);
  const double h = 1e-6;
  Vec fd = (forward(m, Vec(x + h * dx)) - forward(m, Vec(x - h * dx))) / (2 * h);
  Vec jvp = input_jvp(m, trace, dx);
  CHECK((fd - jvp).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("averaged_forward with eta = 0 is the plain forward") {
  MlpModel m = random_model(2, {5}, 2, Activation::Tanh, 21);
  RngStream rng(22);
  Vec x = random_vec(rng, 2);
  AugmentationParams aug = AugmentationParams::point_rotation(0.0);
  RngStream ar(23);
  AveragedForward af = averaged_forward(m, x, aug, 9, ar);
  CHECK(af.identity);
  CHECK(af.fhat == forward(m, x));
  CHECK(af.eps.size() == 9);
}

TEST_CASE("averaged_forward converges to the analytic expectation") {
  // Linear model f(x) = Wx under point rotation:
  // E[f-hat] = W E[R(eps*eta)] x = (sin(eta)/eta) W x for eps ~ U[-1,1].
  MlpModel lin;
  DenseLayer layer;
  RngStream wr(24);
  layer.W = Mat(2, 2);
  layer.W << 0.7, -0.3, 0.2, 1.1;
  layer.b = Vec::Zero(2);
  layer.act = Activation::Identity;
  lin.layers.push_back(layer);

  Vec x(2);
  x << 0.8, -0.5;
  double eta = 1.1;
  AugmentationParams aug = AugmentationParams::point_rotation(eta);
  Vec analytic = (std::sin(eta) / eta) * (layer.W * x);

  RngStream rng(25);
  AveragedForward af = averaged_forward(lin, x, aug, 100000, rng);
  CHECK((af.fhat - analytic).norm() < 0.01);
}

TEST_CASE("averaged_forward antithetic S=2 on a linear model is even in eta") {
  MlpModel lin;
  DenseLayer layer;
  layer.W = Mat(2, 2);
  layer.W << 1.5, 0.2, -0.4, 0.9;
  layer.b = Vec::Zero(2);
  layer.act = Activation::Identity;
  lin.layers.push_back(layer);
  Vec x(2);
  x << 0.3, 0.9;
  for (double eta : {0.4, 1.2}) {
    RngStream r1(77), r2(77);
    AveragedForward fp = averaged_forward(
        lin, x, AugmentationParams::point_rotation(eta), 2, r1, true);
    AveragedForward fm = averaged_forward(
        lin, x, AugmentationParams::point_rotation(-eta), 2, r2, true);
    CHECK((fp.fhat - fm.fhat).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("averaged_forward is invariant to sample order") {
  MlpModel m = random_model(2, {6}, 2, Activation::Tanh, 26);
  RngStream rng(27);
  Vec x = random_vec(rng, 2);
  AugmentationParams aug = AugmentationParams::point_rotation(0.8);
  auto eps = sample_eps(rng, 1, 32, false);
  std::vector<Vec> draws, rev;
  for (auto& e : eps) draws.push_back(e.eps);
  rev.assign(draws.rbegin(), draws.rend());
  Vec a = averaged_forward_eps(m, x, aug, draws).fhat;
  Vec b = averaged_forward_eps(m, x, aug, rev).fhat;
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("averaged_forward_tangent is exactly zero at eta = 0 antithetic") {
  MlpModel m = random_model(2, {5}, 3, Activation::Tanh, 28);
  RngStream rng(29);
  Vec x = random_vec(rng, 2);
  AugmentationParams aug = AugmentationParams::point_rotation(0.0);
  RngStream ar(30);
  AveragedForwardTangent t = averaged_forward_tangent(m, x, aug, 8, ar, true);
  CHECK(t.dfhat_deta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("averaged_forward_tangent matches frozen-eps finite differences") {
  MlpModel m = random_model(2, {5}, 2, Activation::Tanh, 31);
  RngStream xr(32);
  Vec x = random_vec(xr, 2);
  const double h = 1e-6;
  const uint64_t seed = 1234;
  for (double eta : {0.35, 0.9}) {
    RngStream r0(seed);
    AveragedForwardTangent t = averaged_forward_tangent(
        m, x, AugmentationParams::point_rotation(eta), 16, r0, true);
    RngStream rp(seed), rm(seed);
    Vec fp = averaged_forward(m, x, AugmentationParams::point_rotation(eta + h),
                              16, rp, true).fhat;
    Vec fm = averaged_forward(m, x, AugmentationParams::point_rotation(eta - h),
                              16, rm, true).fhat;
    Vec fd = (fp - fm) / (2.0 * h);
    CHECK((t.dfhat_deta.col(0) - fd).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("averaged_forward_tangent image family matches finite differences") {
  MlpModel m = random_model(36, {4}, 2, Activation::Tanh, 33);
  RngStream xr(34);
  Vec x(36);
  for (int i = 0; i < 36; ++i) x[i] = 0.5 + 0.4 * std::sin(0.6 * i);
  Vec eta(6);
  eta << 0.12, -0.08, 0.3, 0.1, 0.05, -0.07;
  const double h = 1e-5;
  const uint64_t seed = 4321;
  RngStream r0(seed);
  AveragedForwardTangent t = averaged_forward_tangent(
      m, x, AugmentationParams::image_affine(eta, 6, 6), 6, r0, true);
  for (int i = 0; i < 6; ++i) {
    Vec ep = eta, em = eta;
    ep[i] += h;
    em[i] -= h;
    RngStream rp(seed), rm(seed);
    Vec fp = averaged_forward(m, x, AugmentationParams::image_affine(ep, 6, 6),
                              6, rp, true).fhat;
    Vec fm = averaged_forward(m, x, AugmentationParams::image_affine(em, 6, 6),
                              6, rm, true).fhat;
    Vec fd = (fp - fm) / (2.0 * h);
    CHECK((t.dfhat_deta.col(i) - fd).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("averaged_forward_tangent analytic value for a linear model, k=1") {
  // d/deta f-hat = W * (1/S) sum_s eps_s R'(eps_s eta) x
  MlpModel lin;
  DenseLayer layer;
  layer.W = Mat(2, 2);
  layer.W << 0.9, 0.1, -0.2, 1.3;
  layer.b = Vec::Zero(2);
  layer.act = Activation::Identity;
  lin.layers.push_back(layer);
  Vec x(2);
  x << 0.6, -0.4;
  double eta = 0.7;
  const uint64_t seed = 555;
  const int S = 12;
  RngStream r0(seed);
  AveragedForwardTangent t = averaged_forward_tangent(
      lin, x, AugmentationParams::point_rotation(eta), S, r0, false);
  RngStream r1(seed);
  auto eps = sample_eps(r1, 1, S, false);
  Vec acc = Vec::Zero(2);
  for (const auto& e : eps) {
    double ang = e.eps[0] * eta;
    Mat2 rp;
    rp << -std::sin(ang), -std::cos(ang), std::cos(ang), -std::sin(ang);
    acc += e.eps[0] * (rp * x);
  }
  Vec expect = layer.W * (acc / S);
  CHECK((t.dfhat_deta.col(0) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("trace_tangent and back_grads_tangent match finite differences") {
  MlpModel m = random_model(3, {5, 4}, 2, Activation::Tanh, 35);
  RngStream rng(36);
  Vec x = random_vec(rng, 3);
  Vec dx = random_vec(rng, 3);
  ForwardTrace trace;
  forward(m, x, &trace);
  TraceTangent tt = trace_tangent(m, trace, dx);
  LayerBackGrads bg = back_grads(m, trace);
  LayerBackGrads dbg = back_grads_tangent(m, trace, bg, tt);

  const double h = 1e-6;
  ForwardTrace tp, tm;
  forward(m, Vec(x + h * dx), &tp);
  forward(m, Vec(x - h * dx), &tm);
  LayerBackGrads bp = back_grads(m, tp);
  LayerBackGrads bm = back_grads(m, tm);
  for (int l = 0; l < m.num_layers(); ++l) {
    Vec da_fd = (tp.inputs[l] - tm.inputs[l]) / (2.0 * h);
    CHECK((tt.d_inputs[l] - da_fd).cwiseAbs().maxCoeff() < 1e-6);
    Mat dg_fd = (bp.g[l] - bm.g[l]) / (2.0 * h);
    CHECK((dbg.g[l] - dg_fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("backprop_theta agrees with jacobian_params") {
  MlpModel m = random_model(3, {4}, 2, Activation::Tanh, 37);
  RngStream rng(38);
  Vec x = random_vec(rng, 3);
  Vec dlogits = random_vec(rng, 2);
  ForwardTrace trace;
  forward(m, x, &trace);
  std::vector<Mat> grads;
  for (const auto& l : m.layers)
    grads.push_back(Mat::Zero(l.out_dim(), l.in_dim() + 1));
  backprop_theta(m, trace, dlogits, grads);

  Vec viaJ = jacobian_params(m, x).transpose() * dlogits;
  int off = 0;
  for (int l = 0; l < m.num_layers(); ++l) {
    const int g = m.layers[l].out_dim();
    const int d = m.layers[l].in_dim();
    for (int j = 0; j <= d; ++j)
      for (int i = 0; i < g; ++i)
        CHECK(grads[l](i, j) ==
              doctest::Approx(viaJ[off + j * g + i]).epsilon(1e-12));
    off += m.layers[l].param_count();
  }
}
