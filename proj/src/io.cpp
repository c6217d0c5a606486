// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#include "marglap/io.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as native little-endian f64");

namespace marglap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void rename_over(const fs::path& tmp, const fs::path& target) {
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw FormatError("atomic write failed for " + target.string() + ": " +
                      ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

std::vector<double> read_f64_payload(const std::string& path,
                                     std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open payload: " + path);
  std::vector<double> data(expected);
  if (!in.read(reinterpret_cast<char*>(data.data()),
               static_cast<std::streamsize>(expected * sizeof(double)))) {
    throw FormatError("payload truncated: " + path);
  }
  return data;
}

}  // namespace

void atomic_write_text(const std::string& path, const std::string& content) {
  atomic_write_binary(path, content.data(), content.size());
}

void atomic_write_binary(const std::string& path, const void* data,
                         std::size_t bytes) {
  fs::path target(path);
  if (target.has_parent_path()) {
    fs::create_directories(target.parent_path());
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + tmp.string());
    out.write(static_cast<const char*>(data),
              static_cast<std::streamsize>(bytes));
    if (!out) throw FormatError("write failed: " + tmp.string());
  }
  rename_over(tmp, target);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_checkpoint(const MlpModel& model, std::uint64_t seed,
                     const std::string& prefix) {
  json header;
  std::vector<int> sizes;
  sizes.push_back(model.input_dim());
  for (const auto& l : model.layers) sizes.push_back(l.out_dim());
  header["layer_sizes"] = sizes;
  std::vector<std::string> acts;
  for (const auto& l : model.layers) acts.push_back(activation_name(l.act));
  header["activations"] = acts;
  header["seed"] = seed;
  header["param_count"] = model.param_count();
  header["payload"] = fs::path(prefix + ".bin").filename().string();
  atomic_write_text(prefix + ".json", header.dump(2) + "\n");

  Vec theta = model.flatten();
  atomic_write_binary(prefix + ".bin", theta.data(),
                      theta.size() * sizeof(double));
}

MlpModel load_checkpoint(const std::string& prefix, std::uint64_t* seed) {
  json header = json::parse(read_file(prefix + ".json"));
  std::vector<int> sizes = header.at("layer_sizes").get<std::vector<int>>();
  std::vector<std::string> acts =
      header.at("activations").get<std::vector<std::string>>();
  if (sizes.size() < 2 || acts.size() + 1 != sizes.size()) {
    throw FormatError("checkpoint header is inconsistent: " + prefix);
  }
  MlpModel m;
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer layer;
    layer.W = Mat::Zero(sizes[l + 1], sizes[l]);
    layer.b = Vec::Zero(sizes[l + 1]);
    layer.act = activation_from_name(acts[l]);
    m.layers.push_back(std::move(layer));
  }
  const int P = header.at("param_count").get<int>();
  if (P != m.param_count()) {
    throw FormatError("checkpoint param_count mismatch: " + prefix);
  }
  std::vector<double> payload = read_f64_payload(prefix + ".bin", P);
  m.unflatten(Eigen::Map<const Vec>(payload.data(), P));
  if (seed) *seed = header.at("seed").get<std::uint64_t>();
  return m;
}

void save_dataset(const Dataset& d, const std::string& prefix) {
  json header;
  header["kind"] = d.kind == Dataset::Kind::Points2D ? "points2d" : "images";
  header["n"] = d.n();
  header["dim"] = d.dim();
  header["C"] = d.C;
  header["H"] = d.H;
  header["W"] = d.W;
  header["seed"] = d.seed;
  header["provenance"] = d.provenance;
  header["payload"] = fs::path(prefix + ".bin").filename().string();
  atomic_write_text(prefix + ".json", header.dump(2) + "\n");

  std::vector<double> payload;
  payload.reserve(d.n() * d.dim() + d.n());
  for (long i = 0; i < d.n(); ++i)
    for (int j = 0; j < d.dim(); ++j) payload.push_back(d.inputs(i, j));
  for (long i = 0; i < d.n(); ++i)
    payload.push_back(static_cast<double>(d.labels[i]));
  atomic_write_binary(prefix + ".bin", payload.data(),
                      payload.size() * sizeof(double));
}

Dataset load_dataset(const std::string& prefix) {
  json header = json::parse(read_file(prefix + ".json"));
  Dataset d;
  std::string kind = header.at("kind").get<std::string>();
  if (kind == "points2d") {
    d.kind = Dataset::Kind::Points2D;
  } else if (kind == "images") {
    d.kind = Dataset::Kind::Images;
  } else {
    throw FormatError("dataset cache: unknown kind " + kind);
  }
  const long n = header.at("n").get<long>();
  const int dim = header.at("dim").get<int>();
  d.C = header.at("C").get<int>();
  d.H = header.at("H").get<int>();
  d.W = header.at("W").get<int>();
  d.seed = header.at("seed").get<std::uint64_t>();
  d.provenance = header.at("provenance").get<std::string>();
  std::vector<double> payload =
      read_f64_payload(prefix + ".bin", static_cast<std::size_t>(n) * dim + n);
  d.inputs.resize(n, dim);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) d.inputs(i, j) = payload[i * dim + j];
  d.labels.resize(n);
  for (long i = 0; i < n; ++i) {
    d.labels[i] = static_cast<int>(payload[n * dim + i]);
  }
  return d;
}

}  // namespace marglap
