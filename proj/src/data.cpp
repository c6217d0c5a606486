// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#include "marglap/data.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include "marglap/augment.hpp"
#include "marglap/linalg.hpp"

namespace marglap {

namespace {

std::uint32_t read_u32_be(std::ifstream& in, const std::string& field,
                          const std::string& path) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) {
    throw FormatError("IDX file " + path + ": truncated while reading " +
                      field);
  }
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_u32_be(std::ofstream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(buf), 4);
}

}  // namespace

TransformSpec::Kind transform_from_name(const std::string& name) {
  if (name == "none") return TransformSpec::Kind::None;
  if (name == "full_rot") return TransformSpec::Kind::FullRot;
  if (name == "partial_rot") return TransformSpec::Kind::PartialRot;
  if (name == "translate") return TransformSpec::Kind::Translate;
  if (name == "scale") return TransformSpec::Kind::Scale;
  throw ConfigError("unknown transform: " + name);
}

std::string transform_name(TransformSpec::Kind k) {
  switch (k) {
    case TransformSpec::Kind::None: return "none";
    case TransformSpec::Kind::FullRot: return "full_rot";
    case TransformSpec::Kind::PartialRot: return "partial_rot";
    case TransformSpec::Kind::Translate: return "translate";
    case TransformSpec::Kind::Scale: return "scale";
  }
  return "none";
}

Dataset gen_toy(std::uint64_t seed, int n) {
  if (n < 2) {
    throw ConfigError("gen_toy: need at least 2 points");
  }
  RngStream rng(mix_seed(seed, stream_tag::kData));
  Dataset d;
  d.kind = Dataset::Kind::Points2D;
  d.inputs.resize(n, 2);
  d.labels.resize(n);
  d.C = 2;
  d.seed = seed;
  d.provenance = "toy(soft +-60deg rotation)";
  const int n0 = n / 2;
  for (int i = 0; i < n; ++i) {
    const int cls = i < n0 ? 0 : 1;
    double radius = (cls == 0 ? 1.0 : 2.0) + 0.05 * rng.normal();
    double angle = 0.1 * rng.normal();
    angle += rng.uniform(-M_PI / 3.0, M_PI / 3.0);
    d.inputs(i, 0) = radius * std::cos(angle);
    d.inputs(i, 1) = radius * std::sin(angle);
    d.labels[i] = cls;
  }
  return d;
}

Dataset to_polar(const Dataset& d) {
  if (d.kind != Dataset::Kind::Points2D) {
    throw ShapeError("to_polar: expects a 2-D point dataset");
  }
  Dataset out = d;
  out.inputs.resize(d.n(), 3);
  for (long i = 0; i < d.n(); ++i) {
    double x = d.inputs(i, 0), y = d.inputs(i, 1);
    double r = std::hypot(x, y);
    double phi = (r > 0.0) ? std::atan2(y, x) : 0.0;
    out.inputs(i, 0) = r;
    out.inputs(i, 1) = std::cos(phi);
    out.inputs(i, 2) = std::sin(phi);
  }
  out.provenance = d.provenance + "+polar";
  return out;
}

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("IDX images file not found: " + images_path);
  if (read_u32_be(img, "images magic", images_path) != 0x00000803u) {
    throw FormatError("IDX file " + images_path +
                      ": bad images magic (expected 0x00000803)");
  }
  std::uint32_t n = read_u32_be(img, "image count", images_path);
  std::uint32_t rows = read_u32_be(img, "rows", images_path);
  std::uint32_t cols = read_u32_be(img, "cols", images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("IDX labels file not found: " + labels_path);
  if (read_u32_be(lab, "labels magic", labels_path) != 0x00000801u) {
    throw FormatError("IDX file " + labels_path +
                      ": bad labels magic (expected 0x00000801)");
  }
  std::uint32_t n_labels = read_u32_be(lab, "label count", labels_path);
  if (n != n_labels) {
    throw FormatError("IDX count mismatch: " + std::to_string(n) +
                      " images vs " + std::to_string(n_labels) + " labels");
  }

  Dataset d;
  d.kind = Dataset::Kind::Images;
  d.H = static_cast<int>(rows);
  d.W = static_cast<int>(cols);
  d.inputs.resize(n, rows * cols);
  d.labels.resize(n);
  d.provenance = "idx(" + images_path + ")";
  std::vector<unsigned char> buf(rows * cols);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
      throw FormatError("IDX file " + images_path +
                        ": truncated pixel data at image " +
                        std::to_string(i));
    }
    for (size_t p = 0; p < buf.size(); ++p) {
      d.inputs(i, p) = buf[p] / 255.0;
    }
  }
  int max_label = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    char c;
    if (!lab.read(&c, 1)) {
      throw FormatError("IDX file " + labels_path +
                        ": truncated label data at index " +
                        std::to_string(i));
    }
    d.labels[i] = static_cast<unsigned char>(c);
    max_label = std::max(max_label, d.labels[i]);
  }
  d.C = max_label + 1;
  return d;
}

void write_idx_images(const std::string& path, const Mat& images01, int H,
                      int W) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path);
  write_u32_be(out, 0x00000803u);
  write_u32_be(out, static_cast<std::uint32_t>(images01.rows()));
  write_u32_be(out, static_cast<std::uint32_t>(H));
  write_u32_be(out, static_cast<std::uint32_t>(W));
  for (long i = 0; i < images01.rows(); ++i) {
    for (long p = 0; p < images01.cols(); ++p) {
      double v = std::min(1.0, std::max(0.0, images01(i, p)));
      unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
      out.write(reinterpret_cast<char*>(&b), 1);
    }
  }
}

void write_idx_labels(const std::string& path, const IVec& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path);
  write_u32_be(out, 0x00000801u);
  write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  for (long i = 0; i < labels.size(); ++i) {
    unsigned char b = static_cast<unsigned char>(labels[i]);
    out.write(reinterpret_cast<char*>(&b), 1);
  }
}

Dataset apply_transform(const Dataset& d, const TransformSpec& t) {
  if (t.kind == TransformSpec::Kind::None) {
    return d;
  }
  if (d.kind != Dataset::Kind::Images) {
    throw ShapeError("apply_transform: expects an image dataset");
  }
  Dataset out = d;
  out.provenance = d.provenance + "+" + transform_name(t.kind);
  const auto& gens = affine_generators();
  for (long i = 0; i < d.n(); ++i) {
    RngStream rng(mix_seed(t.seed, stream_tag::kData,
                           static_cast<std::uint64_t>(i)));
    Mat3 T;
    switch (t.kind) {
      case TransformSpec::Kind::FullRot:
        T = expm3(Mat3(rng.uniform(-M_PI, M_PI) * gens[2]));
        break;
      case TransformSpec::Kind::PartialRot:
        T = expm3(Mat3(rng.uniform(-M_PI / 2.0, M_PI / 2.0) * gens[2]));
        break;
      case TransformSpec::Kind::Translate: {
        double dx = rng.uniform(-8.0, 8.0) * 2.0 / (d.W - 1);
        double dy = rng.uniform(-8.0, 8.0) * 2.0 / (d.H - 1);
        T = Mat3::Identity();
        T(0, 2) = dx;
        T(1, 2) = dy;
        break;
      }
      case TransformSpec::Kind::Scale: {
        double s = rng.uniform(-std::log(2.0), std::log(2.0));
        T = Mat3::Identity();
        T(0, 0) = std::exp(s);
        T(1, 1) = std::exp(s);
        break;
      }
      case TransformSpec::Kind::None:
        T = Mat3::Identity();
        break;
    }
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>
        img(d.inputs.row(i).data(), d.H, d.W);
    Mat warped = warp_image(img, T);
    for (int r = 0; r < d.H; ++r)
      for (int c = 0; c < d.W; ++c) out.inputs(i, r * d.W + c) = warped(r, c);
  }
  return out;
}

Dataset subset(const Dataset& d, long n, std::uint64_t seed) {
  if (n > d.n()) {
    throw ConfigError("subset: requested " + std::to_string(n) + " of " +
                      std::to_string(d.n()) + " samples");
  }
  std::vector<long> idx(d.n());
  for (long i = 0; i < d.n(); ++i) idx[i] = i;
  RngStream rng(mix_seed(seed, stream_tag::kData, 0x5u));
  for (long i = 0; i < n; ++i) {
    long j = i + static_cast<long>(rng.uniform_int(d.n() - i));
    std::swap(idx[i], idx[j]);
  }
  Dataset out = d;
  out.inputs.resize(n, d.dim());
  out.labels.resize(n);
  for (long i = 0; i < n; ++i) {
    out.inputs.row(i) = d.inputs.row(idx[i]);
    out.labels[i] = d.labels[idx[i]];
  }
  out.provenance = d.provenance + "+subset" + std::to_string(n);
  return out;
}

Dataset gen_fixture_images(std::uint64_t seed, int n, int H, int W, int C) {
  RngStream rng(mix_seed(seed, stream_tag::kData, 0xF1u));
  Dataset d;
  d.kind = Dataset::Kind::Images;
  d.H = H;
  d.W = W;
  d.C = C;
  d.seed = seed;
  d.provenance = "fixture" + std::to_string(H) + "x" + std::to_string(W);
  d.inputs.resize(n, H * W);
  d.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    Mat coarse(3, 3);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) coarse(r, c) = rng.uniform01();
    for (int r = 0; r < H; ++r) {
      double fy = 2.0 * r / (H - 1);
      int y0 = std::min(1, static_cast<int>(fy));
      double wy = fy - y0;
      for (int c = 0; c < W; ++c) {
        double fx = 2.0 * c / (W - 1);
        int x0 = std::min(1, static_cast<int>(fx));
        double wx = fx - x0;
        double v = (1 - wy) * ((1 - wx) * coarse(y0, x0) +
                               wx * coarse(y0, x0 + 1)) +
                   wy * ((1 - wx) * coarse(y0 + 1, x0) +
                         wx * coarse(y0 + 1, x0 + 1));
        d.inputs(i, r * W + c) = v;
      }
    }
    d.labels[i] = static_cast<int>(rng.uniform_int(C));
  }
  return d;
}

}  // namespace marglap
