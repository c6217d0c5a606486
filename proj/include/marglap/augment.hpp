// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "marglap/rng.hpp"
#include "marglap/types.hpp"

namespace marglap {

enum class AugFamily { PointRotation, ImageAffine };

/// The invariance vector eta with its family. For ImageAffine, eta has the 6
/// components (h-translate, v-translate, rotate, h-scale, v-scale, shear);
/// for PointRotation it is the single rotation bound in radians. Stored
/// unconstrained: only |eta_i| affects the distribution because eps is
/// symmetric. H and W carry the image grid for the affine family.
struct AugmentationParams {
  AugFamily family = AugFamily::PointRotation;
  Vec eta;
  int H = 0;
  int W = 0;

  int k() const { return static_cast<int>(eta.size()); }
  bool is_zero() const { return eta.isZero(0.0); }

  static AugmentationParams point_rotation(double eta_rot) {
    AugmentationParams p;
    p.family = AugFamily::PointRotation;
    p.eta = Vec::Constant(1, eta_rot);
    return p;
  }
  static AugmentationParams image_affine(const Vec& eta, int H, int W) {
    AugmentationParams p;
    p.family = AugFamily::ImageAffine;
    p.eta = eta;
    p.H = H;
    p.W = W;
    return p;
  }
};

/// One reparameterization draw, eps in [-1,1]^k.
struct EpsSample {
  Vec eps;
};

/// The six affine generator matrices G1..G6 (exact integer entries).
const std::array<Mat3, 6>& affine_generators();

/// S i.i.d. uniform draws on [-1,1]^k. With antithetic on, draws come in
/// adjacent +/- pairs (S must be even) so the empirical mean is exactly 0.
std::vector<EpsSample> sample_eps(RngStream& rng, int k, int count,
                                  bool antithetic);

/// Transformation matrix T = exp(sum_i eps_i eta_i G_i) with its eta-tangents
/// dT/deta_i (one per component of eta).
struct AffineSample {
  Mat3 T;
  std::vector<Mat3> tangents;
};
AffineSample affine_matrix(const Vec& eta, const Vec& eps,
                           bool with_tangents = true);

/// Inverse-warp of an H-by-W intensity grid by T: each output pixel at
/// normalized coordinates (x', y') in [-1,1]^2 samples the input at
/// inv(T) (x', y', 1) by bilinear interpolation, zero outside the grid.
/// (-1,-1) is the center of the top-left pixel, (+1,+1) the bottom-right.
Mat warp_image(const Mat& img, const Mat3& T);

/// Directional derivative of warp_image w.r.t. T in direction dT.
Mat warp_image_jvp(const Mat& img, const Mat3& T, const Mat3& dT);

/// Shared-weight variant: JVPs for several directions at once (one
/// interpolation pass). Returns one grid per direction.
std::vector<Mat> warp_image_jvp_multi(const Mat& img, const Mat3& T,
                                      const std::vector<Mat3>& dTs);

/// Planar rotation of a 2-vector: x' = R(eps * eta_rot) x, with the exact
/// eta-tangent dx'/deta = eps * R'(eps * eta_rot) x.
struct RotatedPoint {
  Vec2 x;
  Vec2 dx_deta;
};
RotatedPoint rotate_point(const Vec2& x, double eta_rot, double eps);

/// Augmentation applied to a flattened model input (2-vector for points,
/// row-major H*W for images). dx_deta has one column per component of eta;
/// only filled when with_tangents.
struct AugmentedInput {
  Vec xprime;
  Mat dx_deta;
};
AugmentedInput apply_augmentation(const AugmentationParams& aug, const Vec& x,
                                  const Vec& eps, bool with_tangents);

}  // namespace marglap
