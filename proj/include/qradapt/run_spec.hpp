// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qradapt/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qradapt {

/// "2,4,8" -> {2, 4, 8}
std::vector<int> parse_int_list(const std::string& text);

nlohmann::json load_json_file(const std::filesystem::path& path);

ModelGeometry load_geometry(const std::filesystem::path& path);

/// Overlays a run document onto `base`. Keys mirror the command-line flag
/// names with underscores (space_bits, budget_avg_bits, pop, gens, ...).
/// A "preset" key is applied before the other keys. Unknown keys are errors.
/// Relative geometry paths resolve against `base_dir`.
RunSpec run_spec_from_json(const nlohmann::json& doc, RunSpec base = {},
                           const std::filesystem::path& base_dir = {});

/// Builds a spec from its layers, lowest precedence first: preset (flag,
/// else the document's "preset", else "appendix"), run document, the
/// QR_SEED value, then `flags` (a document of explicitly given flags).
RunSpec layered_run_spec(nlohmann::json document, const nlohmann::json& flags,
                         const std::optional<std::string>& preset_flag,
                         const std::optional<std::string>& seed_env,
                         const std::filesystem::path& base_dir = {});

} // namespace qradapt
