// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "marglap/curvature.hpp"
#include "marglap/laplace.hpp"

namespace marglap {

enum class CurvatureKind { Full, Kfac };

/// Gradient of the Laplace objective w.r.t. eta, with its decomposition into
/// the data-fit part and the log-determinant part.
struct EtaGradient {
  Vec total;
  Vec loglik_part;
  Vec logdet_part;
};

/// sum_n log p(y_n | fhat_n) and its eta-gradient, with per-datum eps streams
/// derived from (pass_seed, datum index).
struct LoglikAndGrad {
  double loglik = 0.0;
  Vec grad;
};
LoglikAndGrad grad_eta_loglik(const MlpModel& model, const Mat& X,
                              const IVec& y, const std::vector<int>& idx,
                              const AugmentationParams& aug, int S,
                              std::uint64_t pass_seed, bool antithetic,
                              int threads = 1);

/// sum_n log p(y_n | fhat_n) only (for report-only passes and FD objectives).
double data_loglik(const MlpModel& model, const Mat& X, const IVec& y,
                   const std::vector<int>& idx, const AugmentationParams& aug,
                   int S, std::uint64_t pass_seed, bool antithetic,
                   int threads = 1);

/// Gradient of the report's logdet term, d(-1/2 log|Hbar|)/d eta_i, via the
/// preconditioner identity tr(Hbar^-1 dHbar/d eta_i). The tangent state is
/// scaled by N/M so a subsampled estimate stays unbiased.
Vec grad_eta_logdet(const KfacCurvature& curv, const KfacTangentState& tstate,
                    const Prior& prior);
Vec grad_eta_logdet(const FullCurvature& curv,
                    const FullGgnTangentState& tstate, const MlpModel& model,
                    const Prior& prior);

/// Central finite differences of a scalar objective at eta with step h.
/// The objective must be a deterministic function of eta (frozen streams).
Vec fd_oracle(const std::function<double(const Vec&)>& objective,
              const Vec& eta, double h);

struct HyperPassOptions {
  CurvatureKind curvature = CurvatureKind::Kfac;
  int S = 1;
  bool antithetic = false;
  bool diff_lambda = true;
  long subsample_m = 0;  // tangent-pass data budget M; 0 means all of idx
  std::uint64_t pass_seed = 0;
  std::uint64_t subsample_seed = 0;
  int threads = 1;
  int p_guard = 20000;
  bool want_grads = true;
};

/// One full hyperparameter pass at the current (theta, eta, gamma):
/// pass 1 accumulates the curvature over all of idx (the pre-conditioner,
/// plus the data loglik and its eta-gradient); pass 2 accumulates curvature
/// tangents over an M-subsample with the same per-datum streams; the parts
/// combine into the report, the eta-gradient and the log-gamma gradient.
struct HyperPassResult {
  MarglikReport report;
  EtaGradient eta_grad;
  Vec gamma_grad;
};

HyperPassResult hyper_pass(const MlpModel& model, const Mat& X, const IVec& y,
                           const std::vector<int>& idx,
                           const AugmentationParams& aug, const Prior& prior,
                           const HyperPassOptions& opts);

/// M-subsample of idx without replacement, deterministic in the seed.
std::vector<int> subsample_indices(const std::vector<int>& idx, long m,
                                   std::uint64_t seed);

}  // namespace marglap
