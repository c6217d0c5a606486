// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "marglap/augment.hpp"
#include "marglap/kahan.hpp"
#include "marglap/model.hpp"
#include "marglap/types.hpp"

namespace marglap {

// Curvature states are mergeable accumulators (a commutative monoid with the
// empty state as identity): shards accumulate locally and merge at a barrier.
// Per-datum eps streams are derived from (pass_seed, datum index), so the
// draws do not depend on how the data is partitioned, and the tangent pass
// re-derives the factor pass's draws (common random numbers).

/// Dense augmented GGN accumulator: H = sum_n Jhat_n^T Lambda(fhat_n) Jhat_n.
struct FullGgnState {
  KahanMat H;
  long n_seen = 0;

  Mat value() const;  // symmetrized accumulated sum
};

FullGgnState make_full_ggn_state(const MlpModel& model, int p_guard = 20000);

/// Augmented KFAC accumulator. Per layer l (homogeneous inputs):
///   A[l] = sum_n abar_l,n abar_l,n^T,  G[l] = sum_n gbar_l,n Lambda_n gbar_l,n^T
/// with abar/gbar the per-datum augmentation means. The finalized curvature
/// block is (1/N) A kron G; the 1/N lives outside the accumulators so shards
/// merge without rescaling.
struct KfacState {
  std::vector<KahanMat> A;
  std::vector<KahanMat> G;
  long n_seen = 0;
};

KfacState make_kfac_state(const MlpModel& model);

/// eta-tangents of the KFAC factors, accumulated over an M-subsample.
/// dA[l][i] = sum_n (dabar abar^T + abar dabar^T), similarly dG with the
/// Lambda product rule. The N/M scaling is applied by the consumer.
struct KfacTangentState {
  std::vector<std::vector<KahanMat>> dA;  // [layer][component]
  std::vector<std::vector<KahanMat>> dG;
  long m_seen = 0;
};

KfacTangentState make_kfac_tangent_state(const MlpModel& model, int k);

/// eta-tangents of the dense augmented GGN.
struct FullGgnTangentState {
  std::vector<KahanMat> dH;  // per component
  long m_seen = 0;
};

FullGgnTangentState make_full_ggn_tangent_state(const MlpModel& model, int k);

/// Accumulate over the rows of X listed in idx (row index doubles as the
/// datum's stream id). Throws CapacityError when param_count > p_guard.
void accumulate_full_ggn(FullGgnState& state, const MlpModel& model,
                         const Mat& X, const std::vector<int>& idx,
                         const AugmentationParams& aug, int S,
                         std::uint64_t pass_seed, bool antithetic,
                         int threads = 1, int p_guard = 20000);

void accumulate_kfac(KfacState& state, const MlpModel& model, const Mat& X,
                     const std::vector<int>& idx,
                     const AugmentationParams& aug, int S,
                     std::uint64_t pass_seed, bool antithetic,
                     int threads = 1);

void accumulate_kfac_tangents(KfacTangentState& state, const MlpModel& model,
                              const Mat& X, const std::vector<int>& idx,
                              const AugmentationParams& aug, int S,
                              std::uint64_t pass_seed, bool antithetic,
                              bool diff_lambda = true, int threads = 1);

void accumulate_full_ggn_tangents(FullGgnTangentState& state,
                                  const MlpModel& model, const Mat& X,
                                  const std::vector<int>& idx,
                                  const AugmentationParams& aug, int S,
                                  std::uint64_t pass_seed, bool antithetic,
                                  bool diff_lambda = true, int threads = 1);

void merge(FullGgnState& into, const FullGgnState& from);
void merge(KfacState& into, const KfacState& from);
void merge(KfacTangentState& into, const KfacTangentState& from);
void merge(FullGgnTangentState& into, const FullGgnTangentState& from);

}  // namespace marglap
