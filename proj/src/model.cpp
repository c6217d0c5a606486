// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#include "marglap/model.hpp"

#include <cmath>

#include "marglap/kahan.hpp"

namespace marglap {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown activation: " + name);
}

namespace {

inline Vec act_apply(Activation a, const Vec& s) {
  switch (a) {
    case Activation::Tanh: return s.array().tanh();
    case Activation::Relu: return s.cwiseMax(0.0);
    case Activation::Identity: return s;
  }
  return s;
}

// First derivative, expressed through the pre-activation s.
inline Vec act_deriv(Activation a, const Vec& s) {
  switch (a) {
    case Activation::Tanh: {
      Vec t = s.array().tanh();
      return 1.0 - t.array().square();
    }
    case Activation::Relu:
      return (s.array() > 0.0).cast<double>();
    case Activation::Identity:
      return Vec::Ones(s.size());
  }
  return Vec::Ones(s.size());
}

// Second derivative (zero a.e. for relu, exactly for identity).
inline Vec act_deriv2(Activation a, const Vec& s) {
  switch (a) {
    case Activation::Tanh: {
      Vec t = s.array().tanh();
      return -2.0 * t.array() * (1.0 - t.array().square());
    }
    case Activation::Relu:
    case Activation::Identity:
      return Vec::Zero(s.size());
  }
  return Vec::Zero(s.size());
}

}  // namespace

int MlpModel::param_count() const {
  int p = 0;
  for (const auto& l : layers) p += l.param_count();
  return p;
}

int MlpModel::layer_param_offset(int l) const {
  int p = 0;
  for (int i = 0; i < l; ++i) p += layers[i].param_count();
  return p;
}

Vec MlpModel::flatten() const {
  Vec theta(param_count());
  int off = 0;
  for (const auto& layer : layers) {
    const int g = layer.out_dim();
    const int d = layer.in_dim();
    for (int j = 0; j < d; ++j) {
      theta.segment(off + j * g, g) = layer.W.col(j);
    }
    theta.segment(off + d * g, g) = layer.b;
    off += layer.param_count();
  }
  return theta;
}

void MlpModel::unflatten(const Vec& theta) {
  if (theta.size() != param_count()) {
    throw ShapeError("unflatten: parameter vector length mismatch");
  }
  int off = 0;
  for (auto& layer : layers) {
    const int g = layer.out_dim();
    const int d = layer.in_dim();
    for (int j = 0; j < d; ++j) {
      layer.W.col(j) = theta.segment(off + j * g, g);
    }
    layer.b = theta.segment(off + d * g, g);
    off += layer.param_count();
  }
}

MlpModel MlpModel::init(int in_dim, const std::vector<int>& hidden,
                        int out_dim, Activation hidden_act, RngStream& rng) {
  MlpModel m;
  std::vector<int> dims;
  dims.push_back(in_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out_dim);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.W.resize(dims[l + 1], dims[l]);
    layer.b.resize(dims[l + 1]);
    double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (int i = 0; i < layer.W.rows(); ++i) {
      for (int j = 0; j < layer.W.cols(); ++j) {
        layer.W(i, j) = rng.uniform(-bound, bound);
      }
    }
    for (int i = 0; i < layer.b.size(); ++i) {
      layer.b[i] = rng.uniform(-bound, bound);
    }
    layer.act =
        (l + 2 == dims.size()) ? Activation::Identity : hidden_act;
    m.layers.push_back(std::move(layer));
  }
  return m;
}

Vec forward(const MlpModel& model, const Vec& x, ForwardTrace* trace) {
  if (x.size() != model.input_dim()) {
    throw ShapeError("forward: input dimension mismatch");
  }
  Vec a = x;
  if (trace) {
    trace->inputs.clear();
    trace->preacts.clear();
    trace->inputs.reserve(model.layers.size());
    trace->preacts.reserve(model.layers.size());
  }
  for (const auto& layer : model.layers) {
    if (trace) trace->inputs.push_back(a);
    Vec s = layer.W * a + layer.b;
    if (trace) trace->preacts.push_back(s);
    a = act_apply(layer.act, s);
  }
  if (trace) trace->logits = a;
  return a;
}

LayerBackGrads back_grads(const MlpModel& model, const ForwardTrace& trace) {
  const int L = model.num_layers();
  const int C = model.output_dim();
  LayerBackGrads out;
  out.g.resize(L);
  out.g[L - 1] = Mat::Identity(C, C);
  for (int l = L - 2; l >= 0; --l) {
    Vec d = act_deriv(model.layers[l].act, trace.preacts[l]);
    out.g[l] = d.asDiagonal() * (model.layers[l + 1].W.transpose() * out.g[l + 1]);
  }
  return out;
}

Mat assemble_jacobian(const MlpModel& model, const ForwardTrace& trace,
                      const LayerBackGrads& bg) {
  const int C = model.output_dim();
  Mat J(C, model.param_count());
  int off = 0;
  for (int l = 0; l < model.num_layers(); ++l) {
    const int g = model.layers[l].out_dim();
    const int d = model.layers[l].in_dim();
    // Layer block column (j * g + i) is d logits / d Wtilde[i, j]
    // = a_tilde[j] * g_l[i, :].
    for (int j = 0; j <= d; ++j) {
      double aj = (j < d) ? trace.inputs[l][j] : 1.0;
      J.block(0, off + j * g, C, g) = aj * bg.g[l].transpose();
    }
    off += model.layers[l].param_count();
  }
  return J;
}

Mat assemble_jacobian_tangent(const MlpModel& model, const ForwardTrace& trace,
                              const LayerBackGrads& bg, const TraceTangent& tt,
                              const LayerBackGrads& dbg) {
  const int C = model.output_dim();
  Mat dJ(C, model.param_count());
  int off = 0;
  for (int l = 0; l < model.num_layers(); ++l) {
    const int g = model.layers[l].out_dim();
    const int d = model.layers[l].in_dim();
    for (int j = 0; j <= d; ++j) {
      double aj = (j < d) ? trace.inputs[l][j] : 1.0;
      double daj = (j < d) ? tt.d_inputs[l][j] : 0.0;
      dJ.block(0, off + j * g, C, g) =
          daj * bg.g[l].transpose() + aj * dbg.g[l].transpose();
    }
    off += model.layers[l].param_count();
  }
  return dJ;
}

Mat jacobian_params(const MlpModel& model, const Vec& x) {
  ForwardTrace trace;
  forward(model, x, &trace);
  return assemble_jacobian(model, trace, back_grads(model, trace));
}

Mat input_jvp_multi(const MlpModel& model, const ForwardTrace& trace,
                    const Mat& dX) {
  if (dX.rows() != model.input_dim()) {
    throw ShapeError("input_jvp: tangent dimension mismatch");
  }
  Mat da = dX;
  for (int l = 0; l < model.num_layers(); ++l) {
    Mat ds = model.layers[l].W * da;
    Vec d = act_deriv(model.layers[l].act, trace.preacts[l]);
    da = d.asDiagonal() * ds;
  }
  return da;
}

Vec input_jvp(const MlpModel& model, const ForwardTrace& trace, const Vec& dx) {
  return input_jvp_multi(model, trace, dx);
}

TraceTangent trace_tangent(const MlpModel& model, const ForwardTrace& trace,
                           const Vec& dx) {
  TraceTangent tt;
  const int L = model.num_layers();
  tt.d_inputs.resize(L);
  tt.d_preacts.resize(L);
  Vec da = dx;
  for (int l = 0; l < L; ++l) {
    tt.d_inputs[l] = da;
    Vec ds = model.layers[l].W * da;
    tt.d_preacts[l] = ds;
    Vec d = act_deriv(model.layers[l].act, trace.preacts[l]);
    da = d.asDiagonal() * ds;
  }
  return tt;
}

LayerBackGrads back_grads_tangent(const MlpModel& model,
                                  const ForwardTrace& trace,
                                  const LayerBackGrads& bg,
                                  const TraceTangent& tt) {
  const int L = model.num_layers();
  const int C = model.output_dim();
  LayerBackGrads out;
  out.g.resize(L);
  out.g[L - 1] = Mat::Zero(C, C);
  for (int l = L - 2; l >= 0; --l) {
    Vec d = act_deriv(model.layers[l].act, trace.preacts[l]);
    Vec dd = act_deriv2(model.layers[l].act, trace.preacts[l])
                 .cwiseProduct(tt.d_preacts[l]);
    const Mat& Wn = model.layers[l + 1].W;
    out.g[l] = dd.asDiagonal() * (Wn.transpose() * bg.g[l + 1]) +
               d.asDiagonal() * (Wn.transpose() * out.g[l + 1]);
  }
  return out;
}

void backprop_theta(const MlpModel& model, const ForwardTrace& trace,
                    const Vec& dlogits, std::vector<Mat>& grads) {
  Vec delta = dlogits;
  for (int l = model.num_layers() - 1; l >= 0; --l) {
    const int d = model.layers[l].in_dim();
    grads[l].leftCols(d).noalias() += delta * trace.inputs[l].transpose();
    grads[l].col(d) += delta;
    if (l > 0) {
      Vec back = model.layers[l].W.transpose() * delta;
      delta = act_deriv(model.layers[l - 1].act, trace.preacts[l - 1])
                  .cwiseProduct(back);
    }
  }
}

AveragedForward averaged_forward_eps(const MlpModel& model, const Vec& x,
                                     const AugmentationParams& aug,
                                     const std::vector<Vec>& eps) {
  AveragedForward out;
  out.eps = eps;
  const int S = static_cast<int>(eps.size());
  if (S < 1) {
    throw ConfigError("averaged_forward: S must be >= 1");
  }
  if (aug.is_zero()) {
    out.identity = true;
    out.traces.resize(1);
    out.fhat = forward(model, x, &out.traces[0]);
    return out;
  }
  out.traces.resize(S);
  KahanMat acc(model.output_dim(), 1);
  for (int s = 0; s < S; ++s) {
    AugmentedInput ai = apply_augmentation(aug, x, out.eps[s], false);
    acc.add(forward(model, ai.xprime, &out.traces[s]));
  }
  out.fhat = acc.value() / S;
  return out;
}

AveragedForward averaged_forward(const MlpModel& model, const Vec& x,
                                 const AugmentationParams& aug, int S,
                                 RngStream& rng, bool antithetic) {
  auto eps = sample_eps(rng, aug.k(), S, antithetic);
  std::vector<Vec> draws;
  draws.reserve(S);
  for (auto& e : eps) draws.push_back(std::move(e.eps));
  return averaged_forward_eps(model, x, aug, draws);
}

AveragedForwardTangent averaged_forward_tangent(const MlpModel& model,
                                                const Vec& x,
                                                const AugmentationParams& aug,
                                                int S, RngStream& rng,
                                                bool antithetic) {
  AveragedForwardTangent out;
  const int C = model.output_dim();
  const int k = aug.k();
  auto eps = sample_eps(rng, k, S, antithetic);

  KahanMat facc(C, 1);
  KahanMat tacc(C, k);
  ForwardTrace trace;
  if (aug.is_zero()) {
    // Identity transform for every eps; tangents still depend on eps and
    // cancel exactly over antithetic pairs.
    forward(model, x, &trace);
    facc.add(trace.logits);
    for (int s = 0; s < S; ++s) {
      AugmentedInput ai = apply_augmentation(aug, x, eps[s].eps, true);
      tacc.add(input_jvp_multi(model, trace, ai.dx_deta));
    }
    out.fhat = trace.logits;
    out.dfhat_deta = tacc.value() / S;
    return out;
  }
  for (int s = 0; s < S; ++s) {
    AugmentedInput ai = apply_augmentation(aug, x, eps[s].eps, true);
    forward(model, ai.xprime, &trace);
    facc.add(trace.logits);
    tacc.add(input_jvp_multi(model, trace, ai.dx_deta));
  }
  out.fhat = facc.value() / S;
  out.dfhat_deta = tacc.value() / S;
  return out;
}

}  // namespace marglap
