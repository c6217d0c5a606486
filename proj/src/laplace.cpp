// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#include "marglap/laplace.hpp"

#include <cmath>

namespace marglap {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Damped dense curvature: H + blockdiag(gamma_l I).
Mat damped_full(const FullCurvature& curv, const MlpModel& model,
                const Prior& prior) {
  Mat h = curv.H;
  Vec gamma = prior.gamma();
  for (int l = 0; l < model.num_layers(); ++l) {
    int off = model.layer_param_offset(l);
    int d = model.layers[l].param_count();
    h.diagonal().segment(off, d).array() += gamma[l];
  }
  return h;
}

}  // namespace

KfacCurvature KfacCurvature::finalize(const KfacState& state) {
  KfacCurvature c;
  c.N = state.n_seen;
  for (size_t l = 0; l < state.A.size(); ++l) {
    Mat a = state.A[l].value();
    Mat g = state.G[l].value();
    a = 0.5 * (a + a.transpose());
    g = 0.5 * (g + g.transpose());
    c.eigA.push_back(sym_eigh(a));
    c.eigG.push_back(sym_eigh(g));
    c.A.push_back(std::move(a));
    c.G.push_back(std::move(g));
  }
  return c;
}

FullCurvature FullCurvature::finalize(const FullGgnState& state) {
  return FullCurvature{state.value(), state.n_seen};
}

double log_prior_value(const MlpModel& model, const Prior& prior) {
  if (prior.log_gamma.size() != model.num_layers()) {
    throw ShapeError("log_prior: one log precision per layer expected");
  }
  Vec gamma = prior.gamma();
  Vec sq = layer_sq_norms(model);
  double out = 0.0;
  for (int l = 0; l < model.num_layers(); ++l) {
    double d = model.layers[l].param_count();
    out += 0.5 * d * (prior.log_gamma[l] - kLog2Pi) - 0.5 * gamma[l] * sq[l];
  }
  return out;
}

Vec layer_sq_norms(const MlpModel& model) {
  Vec sq(model.num_layers());
  for (int l = 0; l < model.num_layers(); ++l) {
    sq[l] = model.layers[l].W.squaredNorm() + model.layers[l].b.squaredNorm();
  }
  return sq;
}

MarglikReport log_marglik(const FullCurvature& curv, const MlpModel& model,
                          const Prior& prior, double loglik) {
  MarglikReport r;
  r.loglik = loglik;
  r.logprior = log_prior_value(model, prior);
  double ld = logdet_spd(damped_full(curv, model, prior));
  r.logdet_term = -0.5 * ld + 0.5 * model.param_count() * kLog2Pi;
  r.total = r.loglik + r.logprior + r.logdet_term;
  return r;
}

MarglikReport log_marglik(const KfacCurvature& curv, const MlpModel& model,
                          const Prior& prior, double loglik) {
  MarglikReport r;
  r.loglik = loglik;
  r.logprior = log_prior_value(model, prior);
  Vec gamma = prior.gamma();
  double ld = 0.0;
  for (int l = 0; l < model.num_layers(); ++l) {
    ld += kron_damped_logdet(curv.eigA[l].eigenvalues,
                             curv.eigG[l].eigenvalues, curv.scale(), gamma[l]);
  }
  r.logdet_term = -0.5 * ld + 0.5 * model.param_count() * kLog2Pi;
  r.total = r.loglik + r.logprior + r.logdet_term;
  return r;
}

Vec grad_log_precision(const FullCurvature& curv, const MlpModel& model,
                       const Prior& prior) {
  Mat hbar = damped_full(curv, model, prior);
  Eigen::LLT<Mat> llt(hbar);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("grad_log_precision: damped curvature "
                                   "is not positive definite");
  }
  Mat hinv = llt.solve(Mat::Identity(hbar.rows(), hbar.cols()));
  Vec gamma = prior.gamma();
  Vec sq = layer_sq_norms(model);
  Vec out(model.num_layers());
  for (int l = 0; l < model.num_layers(); ++l) {
    int off = model.layer_param_offset(l);
    int d = model.layers[l].param_count();
    double tr = hinv.diagonal().segment(off, d).sum();
    out[l] = gamma[l] * (0.5 * d / gamma[l] - 0.5 * sq[l] - 0.5 * tr);
  }
  return out;
}

Vec grad_log_precision(const KfacCurvature& curv, const MlpModel& model,
                       const Prior& prior) {
  Vec gamma = prior.gamma();
  Vec sq = layer_sq_norms(model);
  Vec out(model.num_layers());
  for (int l = 0; l < model.num_layers(); ++l) {
    int d = model.layers[l].param_count();
    Vec pa = Vec::Ones(curv.eigA[l].eigenvalues.size());
    Vec qg = Vec::Ones(curv.eigG[l].eigenvalues.size());
    double tr = kron_damped_bilinear_trace(pa, qg, curv.eigA[l].eigenvalues,
                                           curv.eigG[l].eigenvalues,
                                           curv.scale(), gamma[l]);
    out[l] = gamma[l] * (0.5 * d / gamma[l] - 0.5 * sq[l] - 0.5 * tr);
  }
  return out;
}

}  // namespace marglap
