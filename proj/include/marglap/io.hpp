// Copyright (c) 2026 The marglap authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "marglap/data.hpp"
#include "marglap/model.hpp"

namespace marglap {

/// Write-to-temp-then-rename: the target is fully written or absent.
void atomic_write_text(const std::string& path, const std::string& content);
void atomic_write_binary(const std::string& path, const void* data,
                         std::size_t bytes);

/// Shortest round-trip decimal formatting for CSV/JSON payloads.
std::string format_double(double v);

/// Model checkpoint: <prefix>.json header (layer sizes, activations, seed)
/// plus <prefix>.bin, the canonical parameter vector as little-endian f64.
void save_checkpoint(const MlpModel& model, std::uint64_t seed,
                     const std::string& prefix);
MlpModel load_checkpoint(const std::string& prefix,
                         std::uint64_t* seed = nullptr);

/// Dataset cache in the same header+payload convention; the payload is the
/// row-major input matrix followed by the labels as f64.
void save_dataset(const Dataset& d, const std::string& prefix);
Dataset load_dataset(const std::string& prefix);

}  // namespace marglap
