// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#include "marglap/curvature.hpp"

#include <thread>

#include "marglap/likelihood.hpp"

namespace marglap {

namespace {

// Round-robin chunk assignment: thread t takes chunks t, t+T, ... so a
// single thread reproduces plain sequential order exactly.
constexpr int kChunk = 64;

template <typename State, typename MakeFn, typename ProcessFn>
State sharded_run(int threads, const std::vector<int>& idx, MakeFn make,
                  ProcessFn process) {
  const long n = static_cast<long>(idx.size());
  const long n_chunks = (n + kChunk - 1) / kChunk;
  if (threads <= 1 || n_chunks <= 1) {
    State s = make();
    process(s, 0, n);
    return s;
  }
  const int T = threads;
  std::vector<State> states;
  states.reserve(T);
  for (int t = 0; t < T; ++t) states.push_back(make());
  std::vector<std::thread> pool;
  for (int t = 0; t < T; ++t) {
    pool.emplace_back([&, t]() {
      for (long c = t; c < n_chunks; c += T) {
        long lo = c * kChunk;
        long hi = std::min(n, lo + kChunk);
        process(states[t], lo, hi);
      }
    });
  }
  for (auto& th : pool) th.join();
  for (int t = 1; t < T; ++t) merge(states[0], states[t]);
  return std::move(states[0]);
}

// Everything one datum contributes to the factors: the averaged forward,
// per-sample back-grads, the per-datum means abar/gbar, and Lambda(fhat).
struct DatumEval {
  AveragedForward af;
  std::vector<LayerBackGrads> bgs;  // per sample (one entry when identity)
  std::vector<Vec> abar;            // per layer, homogeneous mean input
  std::vector<Mat> gbar;            // per layer, mean g
  Mat Lambda;
};

std::vector<Vec> draw_eps(const AugmentationParams& aug, int S,
                          std::uint64_t pass_seed, int datum_id,
                          bool antithetic) {
  RngStream rng(mix_seed(pass_seed, static_cast<std::uint64_t>(datum_id)));
  auto eps = sample_eps(rng, aug.k(), S, antithetic);
  std::vector<Vec> out;
  out.reserve(S);
  for (auto& e : eps) out.push_back(std::move(e.eps));
  return out;
}

DatumEval eval_datum(const MlpModel& model, const Vec& x,
                     const AugmentationParams& aug,
                     const std::vector<Vec>& eps) {
  DatumEval ev;
  ev.af = averaged_forward_eps(model, x, aug, eps);
  const int L = model.num_layers();
  const int S = static_cast<int>(eps.size());
  ev.bgs.reserve(ev.af.traces.size());
  for (const auto& trace : ev.af.traces) {
    ev.bgs.push_back(back_grads(model, trace));
  }
  ev.abar.resize(L);
  ev.gbar.resize(L);
  for (int l = 0; l < L; ++l) {
    const int d = model.layers[l].in_dim();
    if (ev.af.identity) {
      Vec at(d + 1);
      at.head(d) = ev.af.traces[0].inputs[l];
      at[d] = 1.0;
      ev.abar[l] = at;
      ev.gbar[l] = ev.bgs[0].g[l];
    } else {
      Vec asum = Vec::Zero(d + 1);
      Mat gsum = Mat::Zero(ev.bgs[0].g[l].rows(), ev.bgs[0].g[l].cols());
      for (int s = 0; s < S; ++s) {
        asum.head(d) += ev.af.traces[s].inputs[l];
        gsum += ev.bgs[s].g[l];
      }
      asum[d] = S;
      ev.abar[l] = asum / S;
      ev.gbar[l] = gsum / S;
    }
  }
  ev.Lambda = lambda(ev.af.fhat);
  return ev;
}

// Per-datum, per-component tangent means of the factor inputs.
struct DatumTangents {
  std::vector<Mat> dabar;  // per layer, (D_l+1) x k
  std::vector<std::vector<Mat>> dgbar;  // [layer][component]
  Mat dfhat;               // C x k
};

DatumTangents eval_datum_tangents(const MlpModel& model, const Vec& x,
                                  const AugmentationParams& aug,
                                  const std::vector<Vec>& eps,
                                  const DatumEval& ev) {
  const int L = model.num_layers();
  const int C = model.output_dim();
  const int k = aug.k();
  const int S = static_cast<int>(eps.size());
  DatumTangents dt;
  dt.dabar.resize(L);
  dt.dgbar.resize(L);
  for (int l = 0; l < L; ++l) {
    dt.dabar[l] = Mat::Zero(model.layers[l].in_dim() + 1, k);
    dt.dgbar[l].assign(k, Mat::Zero(ev.gbar[l].rows(), ev.gbar[l].cols()));
  }
  dt.dfhat = Mat::Zero(C, k);

  for (int s = 0; s < S; ++s) {
    AugmentedInput ai = apply_augmentation(aug, x, eps[s], true);
    const ForwardTrace& trace = ev.af.traces[ev.af.identity ? 0 : s];
    const LayerBackGrads& bg = ev.bgs[ev.af.identity ? 0 : s];
    for (int i = 0; i < k; ++i) {
      TraceTangent tt = trace_tangent(model, trace, ai.dx_deta.col(i));
      LayerBackGrads dbg = back_grads_tangent(model, trace, bg, tt);
      for (int l = 0; l < L; ++l) {
        dt.dabar[l].col(i).head(model.layers[l].in_dim()) += tt.d_inputs[l];
        dt.dgbar[l][i] += dbg.g[l];
      }
      // logits are the last pre-activation
      dt.dfhat.col(i) += tt.d_preacts[L - 1];
    }
  }
  for (int l = 0; l < L; ++l) {
    dt.dabar[l] /= S;
    for (int i = 0; i < k; ++i) dt.dgbar[l][i] /= S;
  }
  dt.dfhat /= S;
  return dt;
}

}  // namespace

Mat FullGgnState::value() const {
  Mat h = H.value();
  return 0.5 * (h + h.transpose());
}

FullGgnState make_full_ggn_state(const MlpModel& model, int p_guard) {
  const int P = model.param_count();
  if (P > p_guard) {
    throw CapacityError(
        "full GGN needs a dense " + std::to_string(P) + "x" +
        std::to_string(P) + " matrix (guard " + std::to_string(p_guard) +
        "); use the KFAC curvature");
  }
  FullGgnState s;
  s.H = KahanMat(P, P);
  return s;
}

KfacState make_kfac_state(const MlpModel& model) {
  KfacState s;
  for (const auto& l : model.layers) {
    s.A.emplace_back(l.in_dim() + 1, l.in_dim() + 1);
    s.G.emplace_back(l.out_dim(), l.out_dim());
  }
  return s;
}

KfacTangentState make_kfac_tangent_state(const MlpModel& model, int k) {
  KfacTangentState s;
  for (const auto& l : model.layers) {
    s.dA.emplace_back(k, KahanMat(l.in_dim() + 1, l.in_dim() + 1));
    s.dG.emplace_back(k, KahanMat(l.out_dim(), l.out_dim()));
  }
  return s;
}

FullGgnTangentState make_full_ggn_tangent_state(const MlpModel& model, int k) {
  FullGgnTangentState s;
  const int P = model.param_count();
  s.dH.assign(k, KahanMat(P, P));
  return s;
}

void accumulate_full_ggn(FullGgnState& state, const MlpModel& model,
                         const Mat& X, const std::vector<int>& idx,
                         const AugmentationParams& aug, int S,
                         std::uint64_t pass_seed, bool antithetic, int threads,
                         int p_guard) {
  if (model.param_count() > p_guard) {
    throw CapacityError("full GGN parameter guard exceeded; use KFAC");
  }
  auto make = [&] { return make_full_ggn_state(model, p_guard); };
  auto process = [&](FullGgnState& s, long lo, long hi) {
    for (long n = lo; n < hi; ++n) {
      const int id = idx[n];
      auto eps = draw_eps(aug, S, pass_seed, id, antithetic);
      DatumEval ev = eval_datum(model, X.row(id).transpose(), aug, eps);
      Mat Jhat;
      if (ev.af.identity) {
        Jhat = assemble_jacobian(model, ev.af.traces[0], ev.bgs[0]);
      } else {
        Jhat = Mat::Zero(model.output_dim(), model.param_count());
        for (int s2 = 0; s2 < S; ++s2) {
          Jhat += assemble_jacobian(model, ev.af.traces[s2], ev.bgs[s2]);
        }
        Jhat /= S;
      }
      s.H.add(Jhat.transpose() * ev.Lambda * Jhat);
      s.n_seen += 1;
    }
  };
  FullGgnState acc = sharded_run<FullGgnState>(threads, idx, make, process);
  merge(state, acc);
}

void accumulate_kfac(KfacState& state, const MlpModel& model, const Mat& X,
                     const std::vector<int>& idx,
                     const AugmentationParams& aug, int S,
                     std::uint64_t pass_seed, bool antithetic, int threads) {
  auto make = [&] { return make_kfac_state(model); };
  auto process = [&](KfacState& s, long lo, long hi) {
    for (long n = lo; n < hi; ++n) {
      const int id = idx[n];
      auto eps = draw_eps(aug, S, pass_seed, id, antithetic);
      DatumEval ev = eval_datum(model, X.row(id).transpose(), aug, eps);
      for (int l = 0; l < model.num_layers(); ++l) {
        s.A[l].add(ev.abar[l] * ev.abar[l].transpose());
        s.G[l].add(ev.gbar[l] * ev.Lambda * ev.gbar[l].transpose());
      }
      s.n_seen += 1;
    }
  };
  KfacState acc = sharded_run<KfacState>(threads, idx, make, process);
  merge(state, acc);
}

void accumulate_kfac_tangents(KfacTangentState& state, const MlpModel& model,
                              const Mat& X, const std::vector<int>& idx,
                              const AugmentationParams& aug, int S,
                              std::uint64_t pass_seed, bool antithetic,
                              bool diff_lambda, int threads) {
  const int k = aug.k();
  auto make = [&] { return make_kfac_tangent_state(model, k); };
  auto process = [&](KfacTangentState& s, long lo, long hi) {
    for (long n = lo; n < hi; ++n) {
      const int id = idx[n];
      auto eps = draw_eps(aug, S, pass_seed, id, antithetic);
      DatumEval ev = eval_datum(model, X.row(id).transpose(), aug, eps);
      DatumTangents dt = eval_datum_tangents(model, X.row(id).transpose(),
                                             aug, eps, ev);
      for (int i = 0; i < k; ++i) {
        Mat dLambda = diff_lambda
                          ? lambda_tangent(ev.af.fhat, dt.dfhat.col(i))
                          : Mat::Zero(ev.Lambda.rows(), ev.Lambda.cols());
        for (int l = 0; l < model.num_layers(); ++l) {
          Vec da = dt.dabar[l].col(i);
          s.dA[l][i].add(da * ev.abar[l].transpose() +
                         ev.abar[l] * da.transpose());
          const Mat& dg = dt.dgbar[l][i];
          Mat gL = ev.gbar[l] * ev.Lambda;
          s.dG[l][i].add(dg * gL.transpose() +
                         ev.gbar[l] * dLambda * ev.gbar[l].transpose() +
                         gL * dg.transpose());
        }
      }
      s.m_seen += 1;
    }
  };
  KfacTangentState acc = sharded_run<KfacTangentState>(threads, idx, make,
                                                       process);
  merge(state, acc);
}

void accumulate_full_ggn_tangents(FullGgnTangentState& state,
                                  const MlpModel& model, const Mat& X,
                                  const std::vector<int>& idx,
                                  const AugmentationParams& aug, int S,
                                  std::uint64_t pass_seed, bool antithetic,
                                  bool diff_lambda, int threads) {
  const int k = aug.k();
  const int P = model.param_count();
  const int C = model.output_dim();
  auto make = [&] { return make_full_ggn_tangent_state(model, k); };
  auto process = [&](FullGgnTangentState& s, long lo, long hi) {
    for (long n = lo; n < hi; ++n) {
      const int id = idx[n];
      const Vec x = X.row(id).transpose();
      auto eps = draw_eps(aug, S, pass_seed, id, antithetic);
      DatumEval ev = eval_datum(model, x, aug, eps);
      const int S_eff = static_cast<int>(eps.size());
      Mat Jhat;
      if (ev.af.identity) {
        Jhat = assemble_jacobian(model, ev.af.traces[0], ev.bgs[0]);
      } else {
        Jhat = Mat::Zero(C, P);
        for (int s2 = 0; s2 < S_eff; ++s2) {
          Jhat += assemble_jacobian(model, ev.af.traces[s2], ev.bgs[s2]);
        }
        Jhat /= S_eff;
      }
      std::vector<Mat> dJhat(k, Mat::Zero(C, P));
      Mat dfhat = Mat::Zero(C, k);
      for (int s2 = 0; s2 < S_eff; ++s2) {
        const ForwardTrace& trace = ev.af.traces[ev.af.identity ? 0 : s2];
        const LayerBackGrads& bg = ev.bgs[ev.af.identity ? 0 : s2];
        AugmentedInput ai = apply_augmentation(aug, x, eps[s2], true);
        for (int i = 0; i < k; ++i) {
          TraceTangent tt = trace_tangent(model, trace, ai.dx_deta.col(i));
          LayerBackGrads dbg = back_grads_tangent(model, trace, bg, tt);
          dJhat[i] += assemble_jacobian_tangent(model, trace, bg, tt, dbg);
          dfhat.col(i) += tt.d_preacts[model.num_layers() - 1];
        }
      }
      dfhat /= S_eff;
      for (int i = 0; i < k; ++i) {
        dJhat[i] /= S_eff;
        Mat dLambda = diff_lambda ? lambda_tangent(ev.af.fhat, dfhat.col(i))
                                  : Mat::Zero(C, C);
        Mat cross = dJhat[i].transpose() * (ev.Lambda * Jhat);
        s.dH[i].add(cross + cross.transpose() +
                    Jhat.transpose() * dLambda * Jhat);
      }
      s.m_seen += 1;
    }
  };
  FullGgnTangentState acc = sharded_run<FullGgnTangentState>(threads, idx,
                                                             make, process);
  merge(state, acc);
}

void merge(FullGgnState& into, const FullGgnState& from) {
  if (into.H.rows() != from.H.rows()) {
    throw ShapeError("merge: full GGN state size mismatch");
  }
  into.H.merge(from.H);
  into.n_seen += from.n_seen;
}

void merge(KfacState& into, const KfacState& from) {
  if (into.A.size() != from.A.size()) {
    throw ShapeError("merge: KFAC layer count mismatch");
  }
  for (size_t l = 0; l < into.A.size(); ++l) {
    if (into.A[l].rows() != from.A[l].rows() ||
        into.G[l].rows() != from.G[l].rows()) {
      throw ShapeError("merge: KFAC factor shape mismatch");
    }
    into.A[l].merge(from.A[l]);
    into.G[l].merge(from.G[l]);
  }
  into.n_seen += from.n_seen;
}

void merge(KfacTangentState& into, const KfacTangentState& from) {
  if (into.dA.size() != from.dA.size() ||
      (into.dA.size() && into.dA[0].size() != from.dA[0].size())) {
    throw ShapeError("merge: KFAC tangent state shape mismatch");
  }
  for (size_t l = 0; l < into.dA.size(); ++l) {
    for (size_t i = 0; i < into.dA[l].size(); ++i) {
      into.dA[l][i].merge(from.dA[l][i]);
      into.dG[l][i].merge(from.dG[l][i]);
    }
  }
  into.m_seen += from.m_seen;
}

void merge(FullGgnTangentState& into, const FullGgnTangentState& from) {
  if (into.dH.size() != from.dH.size()) {
    throw ShapeError("merge: full GGN tangent state shape mismatch");
  }
  for (size_t i = 0; i < into.dH.size(); ++i) {
    into.dH[i].merge(from.dH[i]);
  }
  into.m_seen += from.m_seen;
}

}  // namespace marglap
