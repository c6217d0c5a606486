// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "marglap/curvature.hpp"
#include "marglap/linalg.hpp"
#include "marglap/model.hpp"
#include "marglap/types.hpp"

namespace marglap {

/// Per-layer Gaussian weight prior, parameterized by log precisions so the
/// precision gamma_l = exp(log_gamma_l) stays positive under ascent.
struct Prior {
  Vec log_gamma;

  Vec gamma() const { return log_gamma.array().exp(); }
  static Prior uniform(int layers, double log_gamma_0) {
    return Prior{Vec::Constant(layers, log_gamma_0)};
  }
};

/// Decomposed Laplace log marginal likelihood:
///   total = loglik + logprior + logdet_term
/// with logdet_term = -1/2 log|Hbar| + (P/2) log(2 pi), i.e. the
/// -1/2 log|Hbar / (2 pi)| normalising term of the Gaussian.
struct MarglikReport {
  double loglik = 0.0;
  double logprior = 0.0;
  double logdet_term = 0.0;
  double total = 0.0;
};

/// Finalized KFAC curvature: accumulated factors with cached
/// eigendecompositions; the layer-l damped curvature is
/// (1/N) A_l kron G_l + gamma_l I, realized through eigenvalue shifts.
struct KfacCurvature {
  std::vector<Mat> A, G;
  std::vector<SymEig> eigA, eigG;
  long N = 0;

  double scale() const { return 1.0 / static_cast<double>(N > 0 ? N : 1); }
  static KfacCurvature finalize(const KfacState& state);
};

/// Finalized dense curvature (sum over data, undamped).
struct FullCurvature {
  Mat H;
  long N = 0;

  static FullCurvature finalize(const FullGgnState& state);
};

/// log p(theta | gamma): sum_l [ (d_l/2)(log gamma_l - log 2 pi)
///                               - (gamma_l/2) ||theta_l||^2 ].
double log_prior_value(const MlpModel& model, const Prior& prior);

/// Squared parameter norm per layer.
Vec layer_sq_norms(const MlpModel& model);

MarglikReport log_marglik(const FullCurvature& curv, const MlpModel& model,
                          const Prior& prior, double loglik);
MarglikReport log_marglik(const KfacCurvature& curv, const MlpModel& model,
                          const Prior& prior, double loglik);

/// d total / d log gamma_l = gamma_l (d_l/(2 gamma_l) - ||theta_l||^2/2
///                                    - 1/2 tr(Hbar_l^-1)).
Vec grad_log_precision(const FullCurvature& curv, const MlpModel& model,
                       const Prior& prior);
Vec grad_log_precision(const KfacCurvature& curv, const MlpModel& model,
                       const Prior& prior);

}  // namespace marglap
