// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace marglap {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;
using IVec = Eigen::VectorXi;

/// Dimension/shape violations (non-square input, mismatched factor sizes, ...).
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Matrix is numerically singular (|det| below threshold).
struct SingularError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Cholesky factorization failed: curvature is indefinite, caller should damp.
struct NotPositiveDefiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value (odd antithetic count, bad schema field, ...).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Problem size exceeds a hard guard (e.g. dense GGN parameter cap).
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training loss became non-finite.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed on-disk data (IDX files, checkpoints, caches).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace marglap
