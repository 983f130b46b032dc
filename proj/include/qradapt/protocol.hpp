// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

// Newline-delimited JSON protocol spoken between the search host and an
// external evaluator process over the child's stdin/stdout.
//
//   request:  {"id", "type": "meta"|"evaluate"|"distribution", "config"?,
//              "proxy_steps"?, "calib_index"?, "layer"?, "bit"?}
//   response: {"id", "ok", "performance"?, "dist"?, "meta"?, "error"?}

#pragma once

#include "qradapt/config_space.hpp"
#include "qradapt/evaluator.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qradapt::protocol {

using json = nlohmann::json;

enum class RequestType { meta, evaluate, distribution };

std::string to_string(RequestType type);

struct Request {
    std::uint64_t id = 0;
    RequestType type = RequestType::meta;
    std::optional<ModelConfig> config;
    std::optional<int> proxy_steps;
    std::optional<std::size_t> calib_index;
    std::optional<std::size_t> layer;
    std::optional<int> bit;
};

struct Response {
    std::uint64_t id = 0;
    bool ok = false;
    std::optional<double> performance;
    std::optional<std::vector<double>> dist;
    std::optional<EvaluatorMeta> meta;
    std::optional<std::string> error;
};

/// {"bits": [...], "ranks": [...]}
json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const json& j);

/// [{"frozen_params", "adapter_in_dims", "adapter_out_dims"}, ...]; an
/// optional "overhead_bytes" per layer is accepted and emitted when nonzero.
json geometry_layers_to_json(const std::vector<LayerGeometry>& layers);
std::vector<LayerGeometry> geometry_layers_from_json(const json& j);

/// Geometry document: {"adapter_bytes_per_param"?: int, "layers": [...]}.
json geometry_to_json(const ModelGeometry& geometry);
ModelGeometry geometry_from_json(const json& j);

json to_json(const Request& request);
json to_json(const Response& response);

// Both throw ProtocolError on schema violations.
Request parse_request(const json& j);
Response parse_response(const json& j);
Response parse_response_line(const std::string& line);

/// Answers one request against an in-process evaluator. Evaluator errors
/// become ok=false responses.
Response handle(Evaluator& evaluator, const Request& request);

/// Serves requests line by line until `in` is exhausted. Malformed lines get
/// an ok=false response (id 0 when it cannot be recovered).
void serve(Evaluator& evaluator, std::istream& in, std::ostream& out);

} // namespace qradapt::protocol
