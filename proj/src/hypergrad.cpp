// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#include "marglap/hypergrad.hpp"

#include <thread>

#include "marglap/likelihood.hpp"

namespace marglap {

namespace {

struct LoglikShard {
  KahanScalar loglik;
  KahanMat grad;  // k x 1
};

}  // namespace

LoglikAndGrad grad_eta_loglik(const MlpModel& model, const Mat& X,
                              const IVec& y, const std::vector<int>& idx,
                              const AugmentationParams& aug, int S,
                              std::uint64_t pass_seed, bool antithetic,
                              int threads) {
  const int k = aug.k();
  const long n = static_cast<long>(idx.size());
  auto process = [&](LoglikShard& s, long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      const int id = idx[i];
      RngStream stream(mix_seed(pass_seed, static_cast<std::uint64_t>(id)));
      AveragedForwardTangent t = averaged_forward_tangent(
          model, X.row(id).transpose(), aug, S, stream, antithetic);
      s.loglik.add(-nll(t.fhat, y[id]));
      // d loglik / d eta = -dfhat^T nll_grad
      s.grad.add(-t.dfhat_deta.transpose() * nll_grad(t.fhat, y[id]));
    }
  };

  const int T = std::max(1, threads);
  std::vector<LoglikShard> shards(T);
  for (auto& s : shards) s.grad = KahanMat(k, 1);
  if (T == 1) {
    process(shards[0], 0, n);
  } else {
    constexpr long kChunk = 64;
    const long n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<std::thread> pool;
    for (int t = 0; t < T; ++t) {
      pool.emplace_back([&, t]() {
        for (long c = t; c < n_chunks; c += T) {
          process(shards[t], c * kChunk, std::min(n, (c + 1) * kChunk));
        }
      });
    }
    for (auto& th : pool) th.join();
    for (int t = 1; t < T; ++t) {
      shards[0].loglik.merge(shards[t].loglik);
      shards[0].grad.merge(shards[t].grad);
    }
  }
  return LoglikAndGrad{shards[0].loglik.value(), shards[0].grad.value()};
}

double data_loglik(const MlpModel& model, const Mat& X, const IVec& y,
                   const std::vector<int>& idx, const AugmentationParams& aug,
                   int S, std::uint64_t pass_seed, bool antithetic,
                   int threads) {
  const long n = static_cast<long>(idx.size());
  auto process = [&](KahanScalar& s, long lo, long hi) {
    for (long i = lo; i < hi; ++i) {
      const int id = idx[i];
      RngStream stream(mix_seed(pass_seed, static_cast<std::uint64_t>(id)));
      AveragedForward af = averaged_forward(model, X.row(id).transpose(), aug,
                                            S, stream, antithetic);
      s.add(-nll(af.fhat, y[id]));
    }
  };
  const int T = std::max(1, threads);
  std::vector<KahanScalar> shards(T);
  if (T == 1) {
    process(shards[0], 0, n);
  } else {
    constexpr long kChunk = 64;
    const long n_chunks = (n + kChunk - 1) / kChunk;
    std::vector<std::thread> pool;
    for (int t = 0; t < T; ++t) {
      pool.emplace_back([&, t]() {
        for (long c = t; c < n_chunks; c += T) {
          process(shards[t], c * kChunk, std::min(n, (c + 1) * kChunk));
        }
      });
    }
    for (auto& th : pool) th.join();
    for (int t = 1; t < T; ++t) shards[0].merge(shards[t]);
  }
  return shards[0].value();
}

Vec grad_eta_logdet(const KfacCurvature& curv, const KfacTangentState& tstate,
                    const Prior& prior) {
  const int L = static_cast<int>(curv.A.size());
  if (static_cast<int>(tstate.dA.size()) != L) {
    throw ShapeError("grad_eta_logdet: tangent/factor layer mismatch");
  }
  const int k = static_cast<int>(tstate.dA[0].size());
  const double rescale =
      tstate.m_seen > 0 ? static_cast<double>(curv.N) / tstate.m_seen : 0.0;
  Vec gamma = prior.gamma();
  Vec out = Vec::Zero(k);
  for (int l = 0; l < L; ++l) {
    if (tstate.dA[l][0].rows() != curv.A[l].rows() ||
        tstate.dG[l][0].rows() != curv.G[l].rows()) {
      throw ShapeError("grad_eta_logdet: tangent/factor shape mismatch");
    }
    const SymEig& ea = curv.eigA[l];
    const SymEig& eg = curv.eigG[l];
    Vec qG = eg.eigenvalues;  // diag(V_G^T G V_G)
    Vec pA = ea.eigenvalues;  // diag(V_A^T A V_A)
    for (int i = 0; i < k; ++i) {
      Mat dA = rescale * tstate.dA[l][i].value();
      Mat dG = rescale * tstate.dG[l][i].value();
      Vec p = (ea.eigenvectors.transpose() * dA * ea.eigenvectors).diagonal();
      Vec q = (eg.eigenvectors.transpose() * dG * eg.eigenvectors).diagonal();
      double tr = kron_damped_bilinear_trace(p, qG, ea.eigenvalues,
                                             eg.eigenvalues, curv.scale(),
                                             gamma[l]) +
                  kron_damped_bilinear_trace(pA, q, ea.eigenvalues,
                                             eg.eigenvalues, curv.scale(),
                                             gamma[l]);
      out[i] += -0.5 * curv.scale() * tr;
    }
  }
  return out;
}

Vec grad_eta_logdet(const FullCurvature& curv,
                    const FullGgnTangentState& tstate, const MlpModel& model,
                    const Prior& prior) {
  const int k = static_cast<int>(tstate.dH.size());
  const double rescale =
      tstate.m_seen > 0 ? static_cast<double>(curv.N) / tstate.m_seen : 0.0;
  Mat hbar = curv.H;
  Vec gamma = prior.gamma();
  for (int l = 0; l < model.num_layers(); ++l) {
    hbar.diagonal()
        .segment(model.layer_param_offset(l), model.layers[l].param_count())
        .array() += gamma[l];
  }
  Eigen::LLT<Mat> llt(hbar);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError(
        "grad_eta_logdet: damped curvature is not positive definite");
  }
  Mat hinv = llt.solve(Mat::Identity(hbar.rows(), hbar.cols()));
  Vec out(k);
  for (int i = 0; i < k; ++i) {
    Mat dH = rescale * tstate.dH[i].value();
    out[i] = -0.5 * hinv.cwiseProduct(dH).sum();
  }
  return out;
}

Vec fd_oracle(const std::function<double(const Vec&)>& objective,
              const Vec& eta, double h) {
  if (h <= 0.0) {
    throw ConfigError("fd_oracle: step must be positive");
  }
  Vec out(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    Vec ep = eta, em = eta;
    ep[i] += h;
    em[i] -= h;
    out[i] = (objective(ep) - objective(em)) / (2.0 * h);
  }
  return out;
}

std::vector<int> subsample_indices(const std::vector<int>& idx, long m,
                                   std::uint64_t seed) {
  const long n = static_cast<long>(idx.size());
  if (m <= 0 || m >= n) return idx;
  std::vector<int> pool = idx;
  RngStream rng(seed);
  for (long i = 0; i < m; ++i) {
    long j = i + static_cast<long>(rng.uniform_int(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  return pool;
}

HyperPassResult hyper_pass(const MlpModel& model, const Mat& X, const IVec& y,
                           const std::vector<int>& idx,
                           const AugmentationParams& aug, const Prior& prior,
                           const HyperPassOptions& opts) {
  HyperPassResult out;
  const int k = aug.k();

  double loglik;
  Vec loglik_grad;
  if (opts.want_grads) {
    LoglikAndGrad lg = grad_eta_loglik(model, X, y, idx, aug, opts.S,
                                       opts.pass_seed, opts.antithetic,
                                       opts.threads);
    loglik = lg.loglik;
    loglik_grad = lg.grad;
  } else {
    loglik = data_loglik(model, X, y, idx, aug, opts.S, opts.pass_seed,
                         opts.antithetic, opts.threads);
    loglik_grad = Vec::Zero(k);
  }

  std::vector<int> sub =
      subsample_indices(idx, opts.subsample_m, opts.subsample_seed);

  if (opts.curvature == CurvatureKind::Kfac) {
    KfacState state = make_kfac_state(model);
    accumulate_kfac(state, model, X, idx, aug, opts.S, opts.pass_seed,
                    opts.antithetic, opts.threads);
    KfacCurvature curv = KfacCurvature::finalize(state);
    out.report = log_marglik(curv, model, prior, loglik);
    if (opts.want_grads) {
      KfacTangentState tstate = make_kfac_tangent_state(model, k);
      accumulate_kfac_tangents(tstate, model, X, sub, aug, opts.S,
                               opts.pass_seed, opts.antithetic,
                               opts.diff_lambda, opts.threads);
      out.eta_grad.logdet_part = grad_eta_logdet(curv, tstate, prior);
      out.gamma_grad = grad_log_precision(curv, model, prior);
    }
  } else {
    FullGgnState state = make_full_ggn_state(model, opts.p_guard);
    accumulate_full_ggn(state, model, X, idx, aug, opts.S, opts.pass_seed,
                        opts.antithetic, opts.threads, opts.p_guard);
    FullCurvature curv = FullCurvature::finalize(state);
    out.report = log_marglik(curv, model, prior, loglik);
    if (opts.want_grads) {
      FullGgnTangentState tstate = make_full_ggn_tangent_state(model, k);
      accumulate_full_ggn_tangents(tstate, model, X, sub, aug, opts.S,
                                   opts.pass_seed, opts.antithetic,
                                   opts.diff_lambda, opts.threads);
      out.eta_grad.logdet_part = grad_eta_logdet(curv, tstate, model, prior);
      out.gamma_grad = grad_log_precision(curv, model, prior);
    }
  }

  if (opts.want_grads) {
    out.eta_grad.loglik_part = loglik_grad;
    out.eta_grad.total = out.eta_grad.loglik_part + out.eta_grad.logdet_part;
  } else {
    out.eta_grad.loglik_part = Vec::Zero(k);
    out.eta_grad.logdet_part = Vec::Zero(k);
    out.eta_grad.total = Vec::Zero(k);
    out.gamma_grad = Vec::Zero(model.num_layers());
  }
  return out;
}

}  // namespace marglap
