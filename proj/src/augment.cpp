// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#include "marglap/augment.hpp"

#include <cmath>

#include "marglap/linalg.hpp"

namespace marglap {

const std::array<Mat3, 6>& affine_generators() {
  static const std::array<Mat3, 6> gens = [] {
    std::array<Mat3, 6> g;
    for (auto& m : g) m.setZero();
    g[0](0, 2) = 1.0;                    // horizontal translation
    g[1](1, 2) = 1.0;                    // vertical translation
    g[2](0, 1) = -1.0; g[2](1, 0) = 1.0; // rotation
    g[3](0, 0) = 1.0;                    // horizontal scaling
    g[4](1, 1) = 1.0;                    // vertical scaling
    g[5](0, 1) = 1.0; g[5](1, 0) = 1.0;  // shearing
    return g;
  }();
  return gens;
}

std::vector<EpsSample> sample_eps(RngStream& rng, int k, int count,
                                  bool antithetic) {
  if (count < 1) {
    throw ConfigError("sample_eps: count must be >= 1");
  }
  if (antithetic && count % 2 != 0) {
    throw ConfigError("sample_eps: antithetic sampling needs an even count");
  }
  std::vector<EpsSample> out;
  out.reserve(count);
  if (antithetic) {
    for (int s = 0; s < count / 2; ++s) {
      Vec e(k);
      for (int i = 0; i < k; ++i) e[i] = rng.uniform_pm1();
      out.push_back({e});
      out.push_back({-e});
    }
  } else {
    for (int s = 0; s < count; ++s) {
      Vec e(k);
      for (int i = 0; i < k; ++i) e[i] = rng.uniform_pm1();
      out.push_back({e});
    }
  }
  return out;
}

AffineSample affine_matrix(const Vec& eta, const Vec& eps, bool with_tangents) {
  const auto& gens = affine_generators();
  const int k = static_cast<int>(eta.size());
  Mat3 m = Mat3::Zero();
  for (int i = 0; i < k; ++i) {
    m += eps[i] * eta[i] * gens[i];
  }
  AffineSample out;
  if (!with_tangents) {
    out.T = expm3(m);
    return out;
  }
  out.tangents.resize(k);
  if (m.isZero(0.0)) {
    out.T = Mat3::Identity();
    for (int i = 0; i < k; ++i) out.tangents[i] = eps[i] * gens[i];
    return out;
  }
  for (int i = 0; i < k; ++i) {
    auto [T, L] = expm3_frechet(m, eps[i] * gens[i]);
    out.T = T;
    out.tangents[i] = L;
  }
  return out;
}

namespace {

// Bilinear cell lookup at real pixel coordinates (sx, sy), zero padding.
// On exact integer coordinates the left/lower cell's linear piece is used
// (fixed subgradient; a measure-zero event under continuous eps).
struct BilinearCell {
  int x0, y0;
  double fx, fy;
  double v00, v10, v01, v11;  // v[dy][dx] corner values, 0 outside the grid
};

inline BilinearCell bilinear_cell(const Mat& img, double sx, double sy) {
  BilinearCell c;
  const int H = static_cast<int>(img.rows());
  const int W = static_cast<int>(img.cols());
  double fx0 = std::floor(sx);
  double fy0 = std::floor(sy);
  c.x0 = static_cast<int>(fx0);
  c.y0 = static_cast<int>(fy0);
  c.fx = sx - fx0;
  c.fy = sy - fy0;
  if (c.fx == 0.0 && c.x0 > 0 && c.x0 <= W - 1) {
    c.x0 -= 1;
    c.fx = 1.0;
  }
  if (c.fy == 0.0 && c.y0 > 0 && c.y0 <= H - 1) {
    c.y0 -= 1;
    c.fy = 1.0;
  }
  auto at = [&](int yy, int xx) -> double {
    if (xx < 0 || xx >= W || yy < 0 || yy >= H) return 0.0;
    return img(yy, xx);
  };
  c.v00 = at(c.y0, c.x0);
  c.v10 = at(c.y0, c.x0 + 1);
  c.v01 = at(c.y0 + 1, c.x0);
  c.v11 = at(c.y0 + 1, c.x0 + 1);
  return c;
}

inline double bilinear_value(const BilinearCell& c) {
  return (1.0 - c.fy) * ((1.0 - c.fx) * c.v00 + c.fx * c.v10) +
         c.fy * ((1.0 - c.fx) * c.v01 + c.fx * c.v11);
}

// Gradient of the interpolant w.r.t. (sx, sy).
inline Vec2 bilinear_grad(const BilinearCell& c) {
  double gx = (1.0 - c.fy) * (c.v10 - c.v00) + c.fy * (c.v11 - c.v01);
  double gy = (1.0 - c.fx) * (c.v01 - c.v00) + c.fx * (c.v11 - c.v10);
  return {gx, gy};
}

}  // namespace

Mat warp_image(const Mat& img, const Mat3& T) {
  if (T == Mat3::Identity()) {
    return img;  // bit-exact identity warp
  }
  const int H = static_cast<int>(img.rows());
  const int W = static_cast<int>(img.cols());
  const Mat3 Tinv = inv3(T);
  const double sx_scale = (W > 1) ? 0.5 * (W - 1) : 0.0;
  const double sy_scale = (H > 1) ? 0.5 * (H - 1) : 0.0;
  Mat out(H, W);
  for (int r = 0; r < H; ++r) {
    double yp = (H > 1) ? -1.0 + 2.0 * r / (H - 1) : 0.0;
    for (int cidx = 0; cidx < W; ++cidx) {
      double xp = (W > 1) ? -1.0 + 2.0 * cidx / (W - 1) : 0.0;
      Vec3 src = Tinv * Vec3(xp, yp, 1.0);
      double sx = (src[0] + 1.0) * sx_scale;
      double sy = (src[1] + 1.0) * sy_scale;
      out(r, cidx) = bilinear_value(bilinear_cell(img, sx, sy));
    }
  }
  return out;
}

std::vector<Mat> warp_image_jvp_multi(const Mat& img, const Mat3& T,
                                      const std::vector<Mat3>& dTs) {
  const int H = static_cast<int>(img.rows());
  const int W = static_cast<int>(img.cols());
  const Mat3 Tinv = inv3(T);
  const double sx_scale = (W > 1) ? 0.5 * (W - 1) : 0.0;
  const double sy_scale = (H > 1) ? 0.5 * (H - 1) : 0.0;
  // d(src)/dT in direction dT is -Tinv dT Tinv (x', y', 1).
  std::vector<Mat3> dsrc_maps(dTs.size());
  for (size_t i = 0; i < dTs.size(); ++i) {
    dsrc_maps[i] = -Tinv * dTs[i] * Tinv;
  }
  std::vector<Mat> out(dTs.size(), Mat(H, W));
  for (int r = 0; r < H; ++r) {
    double yp = (H > 1) ? -1.0 + 2.0 * r / (H - 1) : 0.0;
    for (int cidx = 0; cidx < W; ++cidx) {
      double xp = (W > 1) ? -1.0 + 2.0 * cidx / (W - 1) : 0.0;
      Vec3 p(xp, yp, 1.0);
      Vec3 src = Tinv * p;
      double sx = (src[0] + 1.0) * sx_scale;
      double sy = (src[1] + 1.0) * sy_scale;
      Vec2 g = bilinear_grad(bilinear_cell(img, sx, sy));
      for (size_t i = 0; i < dTs.size(); ++i) {
        Vec3 ds = dsrc_maps[i] * p;
        out[i](r, cidx) = g[0] * (ds[0] * sx_scale) + g[1] * (ds[1] * sy_scale);
      }
    }
  }
  return out;
}

Mat warp_image_jvp(const Mat& img, const Mat3& T, const Mat3& dT) {
  return warp_image_jvp_multi(img, T, {dT})[0];
}

RotatedPoint rotate_point(const Vec2& x, double eta_rot, double eps) {
  double ang = eps * eta_rot;
  double c = std::cos(ang);
  double s = std::sin(ang);
  RotatedPoint out;
  out.x = Vec2(c * x[0] - s * x[1], s * x[0] + c * x[1]);
  // d/deta R(eps*eta) x = eps * R'(eps*eta) x
  out.dx_deta = eps * Vec2(-s * x[0] - c * x[1], c * x[0] - s * x[1]);
  return out;
}

AugmentedInput apply_augmentation(const AugmentationParams& aug, const Vec& x,
                                  const Vec& eps, bool with_tangents) {
  AugmentedInput out;
  if (aug.family == AugFamily::PointRotation) {
    if (x.size() != 2) {
      throw ShapeError("apply_augmentation: point rotation expects 2-vectors");
    }
    RotatedPoint rp = rotate_point(Vec2(x[0], x[1]), aug.eta[0], eps[0]);
    out.xprime = rp.x;
    if (with_tangents) {
      out.dx_deta = rp.dx_deta;
    }
    return out;
  }
  if (x.size() != static_cast<Eigen::Index>(aug.H) * aug.W) {
    throw ShapeError("apply_augmentation: input size does not match H*W");
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      img(x.data(), aug.H, aug.W);
  AffineSample af = affine_matrix(aug.eta, eps, with_tangents);
  Mat warped = warp_image(img, af.T);
  out.xprime = Eigen::Map<const Vec>(
      Mat(warped.transpose()).data(), warped.size());
  if (with_tangents) {
    std::vector<Mat> jvps = warp_image_jvp_multi(img, af.T, af.tangents);
    out.dx_deta.resize(x.size(), aug.k());
    for (int i = 0; i < aug.k(); ++i) {
      out.dx_deta.col(i) =
          Eigen::Map<const Vec>(Mat(jvps[i].transpose()).data(), x.size());
    }
  }
  return out;
}

}  // namespace marglap
