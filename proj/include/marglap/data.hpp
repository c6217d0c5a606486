// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "marglap/rng.hpp"
#include "marglap/types.hpp"

namespace marglap {

/// A fixed classification dataset. Images are stored flattened row-major,
/// one sample per row of inputs, intensities in [0,1].
struct Dataset {
  enum class Kind { Points2D, Images };

  Kind kind = Kind::Points2D;
  Mat inputs;
  IVec labels;
  int C = 0;
  int H = 0;
  int W = 0;
  std::string provenance;
  std::uint64_t seed = 0;

  long n() const { return inputs.rows(); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

/// The dataset-construction transforms (fixed parameter ranges).
struct TransformSpec {
  enum class Kind { None, FullRot, PartialRot, Translate, Scale };
  Kind kind = Kind::None;
  std::uint64_t seed = 0;
};

TransformSpec::Kind transform_from_name(const std::string& name);
std::string transform_name(TransformSpec::Kind k);

/// Two-class points on radii 1 and 2 with angular jitter N(0, 0.1^2) and
/// radial jitter N(0, 0.05^2), then rotated about the origin by
/// U[-pi/3, pi/3] (a soft +-60 degree rotational invariance). Balanced.
Dataset gen_toy(std::uint64_t seed, int n = 200);

/// Replace 2-D point inputs by (r, cos phi, sin phi); phi = 0 at the origin.
Dataset to_polar(const Dataset& d);

/// MNIST-style IDX files (big-endian): images magic 0x803, labels 0x801.
/// Pixels are scaled to [0,1]. Throws FormatError naming the offending field.
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);

/// Raw IDX writers (fixtures, dataset preparation).
void write_idx_images(const std::string& path, const Mat& images01, int H,
                      int W);
void write_idx_labels(const std::string& path, const IVec& labels);

/// Apply one independent draw of the transform to each image.
/// FullRot: theta ~ U[-pi, pi]; PartialRot: U[-pi/2, pi/2];
/// Translate: dx, dy ~ U[-8, 8] pixels; Scale: exp(s), s ~ U[-log 2, log 2].
Dataset apply_transform(const Dataset& d, const TransformSpec& t);

/// Uniform subsample without replacement, deterministic in seed.
Dataset subset(const Dataset& d, long n, std::uint64_t seed);

/// Smooth random low-frequency images for gradient-check fixtures:
/// a coarse 3x3 uniform grid bilinearly upsampled to H x W.
Dataset gen_fixture_images(std::uint64_t seed, int n, int H, int W, int C);

}  // namespace marglap
