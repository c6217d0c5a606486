// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "marglap/augment.hpp"
#include "marglap/rng.hpp"
#include "marglap/types.hpp"

namespace marglap {

enum class Activation { Tanh, Relu, Identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

/// One fully-connected layer, out_dim x in_dim weights plus bias.
struct DenseLayer {
  Mat W;
  Vec b;
  Activation act = Activation::Identity;

  int in_dim() const { return static_cast<int>(W.cols()); }
  int out_dim() const { return static_cast<int>(W.rows()); }
  int param_count() const { return out_dim() * (in_dim() + 1); }
};

/// Fixed family of fully-connected networks. The final activation is always
/// Identity: outputs are logits. The canonical parameter vector flattens each
/// layer's bias-augmented matrix [W | b] column-major (columns stacked), so
/// that a layer's GGN block equals A-tilde kron G under this ordering.
struct MlpModel {
  std::vector<DenseLayer> layers;

  int input_dim() const { return layers.front().in_dim(); }
  int output_dim() const { return layers.back().out_dim(); }
  int num_layers() const { return static_cast<int>(layers.size()); }
  int param_count() const;
  int layer_param_offset(int l) const;

  Vec flatten() const;
  void unflatten(const Vec& theta);

  /// Uniform init on [-1/sqrt(in), 1/sqrt(in)] per layer, hidden activations
  /// as given, identity output layer.
  static MlpModel init(int in_dim, const std::vector<int>& hidden, int out_dim,
                       Activation hidden_act, RngStream& rng);
};

/// Per-layer inputs a_0..a_{L-1} (a_0 = x) and pre-activations s_1..s_L;
/// logits are s_L since the last activation is identity.
struct ForwardTrace {
  std::vector<Vec> inputs;
  std::vector<Vec> preacts;
  Vec logits;
};

Vec forward(const MlpModel& model, const Vec& x, ForwardTrace* trace = nullptr);

/// Per-layer transposed Jacobians of the logits w.r.t. pre-activations:
/// g[l] has shape (out_dim of layer l) x C; g for the last layer is I_C.
struct LayerBackGrads {
  std::vector<Mat> g;
};

LayerBackGrads back_grads(const MlpModel& model, const ForwardTrace& trace);

/// C x P Jacobian of the logits w.r.t. the canonical parameter vector.
Mat jacobian_params(const MlpModel& model, const Vec& x);

/// Jacobian assembly from an existing trace and back-grads.
Mat assemble_jacobian(const MlpModel& model, const ForwardTrace& trace,
                      const LayerBackGrads& bg);

/// Directional derivative of the logits w.r.t. the input along dx.
Vec input_jvp(const MlpModel& model, const ForwardTrace& trace, const Vec& dx);

/// Several input directions at once (columns of dX); returns C x k.
Mat input_jvp_multi(const MlpModel& model, const ForwardTrace& trace,
                    const Mat& dX);

/// Forward-mode tangents of all activations/pre-activations along an input
/// direction, for curvature tangents. d_inputs[l] = da_l, d_preacts[l] = ds_l.
struct TraceTangent {
  std::vector<Vec> d_inputs;
  std::vector<Vec> d_preacts;
};
TraceTangent trace_tangent(const MlpModel& model, const ForwardTrace& trace,
                           const Vec& dx);

/// Forward-mode tangent of back_grads along the trace tangent:
/// dg[l] = d/d(input direction) of g[l].
LayerBackGrads back_grads_tangent(const MlpModel& model,
                                  const ForwardTrace& trace,
                                  const LayerBackGrads& bg,
                                  const TraceTangent& tt);

/// Forward-mode tangent of assemble_jacobian along an input direction, given
/// the trace/back-grad tangents for that direction.
Mat assemble_jacobian_tangent(const MlpModel& model, const ForwardTrace& trace,
                              const LayerBackGrads& bg, const TraceTangent& tt,
                              const LayerBackGrads& dbg);

/// Accumulate dLoss/dparams into per-layer [W | b] gradient blocks given
/// dLoss/dlogits. grads must hold one out x (in+1) matrix per layer.
void backprop_theta(const MlpModel& model, const ForwardTrace& trace,
                    const Vec& dlogits, std::vector<Mat>& grads);

/// Monte Carlo average of the network over the augmentation distribution.
/// When eta == 0 the transform is the identity for every eps, so a single
/// unaugmented forward is used (traces holds 1 entry) and fhat = f(x) exactly.
struct AveragedForward {
  Vec fhat;
  std::vector<ForwardTrace> traces;  // size S, or 1 when identity
  std::vector<Vec> eps;              // the S draws actually sampled
  bool identity = false;
};

AveragedForward averaged_forward(const MlpModel& model, const Vec& x,
                                 const AugmentationParams& aug, int S,
                                 RngStream& rng, bool antithetic = false);

/// Same, but over an explicit list of eps draws.
AveragedForward averaged_forward_eps(const MlpModel& model, const Vec& x,
                                     const AugmentationParams& aug,
                                     const std::vector<Vec>& eps);

/// fhat together with dfhat/deta (C x k), by forward-mode through the
/// augmentation tangents. Antithetic pairs are summed adjacently so the
/// eta = 0 tangent cancels exactly.
struct AveragedForwardTangent {
  Vec fhat;
  Mat dfhat_deta;  // C x k
};

AveragedForwardTangent averaged_forward_tangent(const MlpModel& model,
                                                const Vec& x,
                                                const AugmentationParams& aug,
                                                int S, RngStream& rng,
                                                bool antithetic = false);

}  // namespace marglap
