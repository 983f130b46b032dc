// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qradapt/protocol.hpp"

#include "qradapt/error.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace qradapt::protocol {

namespace {

template <typename T>
T get_field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("field '") + key + "': " + e.what());
    }
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return get_field<T>(j, key);
}

void require_object(const json& j, const char* what) {
    if (!j.is_object()) {
        throw ProtocolError(std::string(what) + " is not a JSON object");
    }
}

} // namespace

std::string to_string(RequestType type) {
    switch (type) {
    case RequestType::meta:
        return "meta";
    case RequestType::evaluate:
        return "evaluate";
    case RequestType::distribution:
        return "distribution";
    }
    return "unknown";
}

json config_to_json(const ModelConfig& config) {
    json bits = json::array();
    json ranks = json::array();
    for (const auto& lc : config.layers) {
        bits.push_back(lc.bit);
        ranks.push_back(lc.rank);
    }
    return json{{"bits", bits}, {"ranks", ranks}};
}

ModelConfig config_from_json(const json& j) {
    require_object(j, "config");
    const auto bits = get_field<std::vector<int>>(j, "bits");
    const auto ranks = get_field<std::vector<int>>(j, "ranks");
    if (bits.size() != ranks.size()) {
        throw ProtocolError("config: bits and ranks differ in length");
    }
    ModelConfig config;
    for (std::size_t l = 0; l < bits.size(); ++l) {
        config.layers.push_back(LayerConfig{bits[l], ranks[l]});
    }
    return config;
}

json geometry_layers_to_json(const std::vector<LayerGeometry>& layers) {
    json out = json::array();
    for (const auto& g : layers) {
        json layer{{"frozen_params", g.frozen_params},
                   {"adapter_in_dims", g.adapter_in_dims},
                   {"adapter_out_dims", g.adapter_out_dims}};
        if (g.overhead_bytes != 0) {
            layer["overhead_bytes"] = g.overhead_bytes;
        }
        out.push_back(std::move(layer));
    }
    return out;
}

std::vector<LayerGeometry> geometry_layers_from_json(const json& j) {
    if (!j.is_array()) {
        throw ProtocolError("geometry is not an array");
    }
    std::vector<LayerGeometry> layers;
    for (const auto& item : j) {
        require_object(item, "geometry layer");
        LayerGeometry g;
        g.frozen_params = get_field<std::int64_t>(item, "frozen_params");
        g.adapter_in_dims = get_field<std::vector<std::int64_t>>(item, "adapter_in_dims");
        g.adapter_out_dims = get_field<std::vector<std::int64_t>>(item, "adapter_out_dims");
        g.overhead_bytes = get_optional<std::int64_t>(item, "overhead_bytes").value_or(0);
        try {
            g.validate();
        } catch (const StructuralError& e) {
            throw ProtocolError(e.what());
        }
        layers.push_back(std::move(g));
    }
    return layers;
}

json geometry_to_json(const ModelGeometry& geometry) {
    return json{{"adapter_bytes_per_param", geometry.adapter_bytes_per_param},
                {"layers", geometry_layers_to_json(geometry.layers)}};
}

ModelGeometry geometry_from_json(const json& j) {
    require_object(j, "geometry document");
    ModelGeometry g;
    g.layers = geometry_layers_from_json(j.at("layers"));
    g.adapter_bytes_per_param =
        get_optional<std::int64_t>(j, "adapter_bytes_per_param").value_or(2);
    g.validate();
    return g;
}

json to_json(const Request& r) {
    json j{{"id", r.id}, {"type", to_string(r.type)}};
    if (r.config) {
        j["config"] = config_to_json(*r.config);
    }
    if (r.proxy_steps) {
        j["proxy_steps"] = *r.proxy_steps;
    }
    if (r.calib_index) {
        j["calib_index"] = *r.calib_index;
    }
    if (r.layer) {
        j["layer"] = *r.layer;
    }
    if (r.bit) {
        j["bit"] = *r.bit;
    }
    return j;
}

json to_json(const Response& r) {
    json j{{"id", r.id}, {"ok", r.ok}};
    if (r.performance) {
        j["performance"] = *r.performance;
    }
    if (r.dist) {
        j["dist"] = *r.dist;
    }
    if (r.meta) {
        j["meta"] = json{{"layers", r.meta->layers},
                         {"calib_size", r.meta->calib_size},
                         {"geometry", geometry_layers_to_json(r.meta->geometry.layers)}};
    }
    if (r.error) {
        j["error"] = *r.error;
    }
    return j;
}

Request parse_request(const json& j) {
    require_object(j, "request");
    Request r;
    r.id = get_field<std::uint64_t>(j, "id");
    const auto type = get_field<std::string>(j, "type");
    if (type == "meta") {
        r.type = RequestType::meta;
    } else if (type == "evaluate") {
        r.type = RequestType::evaluate;
    } else if (type == "distribution") {
        r.type = RequestType::distribution;
    } else {
        throw ProtocolError("unknown request type '" + type + "'");
    }
    if (j.contains("config") && !j.at("config").is_null()) {
        r.config = config_from_json(j.at("config"));
    }
    r.proxy_steps = get_optional<int>(j, "proxy_steps");
    r.calib_index = get_optional<std::size_t>(j, "calib_index");
    r.layer = get_optional<std::size_t>(j, "layer");
    r.bit = get_optional<int>(j, "bit");
    return r;
}

Response parse_response(const json& j) {
    require_object(j, "response");
    Response r;
    r.id = get_field<std::uint64_t>(j, "id");
    r.ok = get_field<bool>(j, "ok");
    if (j.contains("performance") && !j.at("performance").is_null()) {
        if (!j.at("performance").is_number()) {
            throw ProtocolError("field 'performance' is not a number");
        }
        r.performance = j.at("performance").get<double>();
    }
    r.dist = get_optional<std::vector<double>>(j, "dist");
    r.error = get_optional<std::string>(j, "error");
    if (j.contains("meta") && !j.at("meta").is_null()) {
        const json& m = j.at("meta");
        require_object(m, "meta");
        EvaluatorMeta meta;
        meta.layers = get_field<std::size_t>(m, "layers");
        meta.calib_size = get_field<std::size_t>(m, "calib_size");
        meta.geometry.layers = geometry_layers_from_json(m.at("geometry"));
        if (meta.geometry.size() != meta.layers) {
            throw ProtocolError("meta: geometry length does not match layer count");
        }
        r.meta = std::move(meta);
    }
    return r;
}

Response parse_response_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("response is not valid JSON: ") + e.what());
    }
    return parse_response(j);
}

Response handle(Evaluator& evaluator, const Request& request) {
    Response resp;
    resp.id = request.id;
    try {
        switch (request.type) {
        case RequestType::meta:
            resp.meta = evaluator.meta();
            break;
        case RequestType::evaluate: {
            if (!request.config) {
                throw ProtocolError("evaluate request without config");
            }
            const auto meta = evaluator.meta();
            if (request.config->size() != meta.layers) {
                throw ProtocolError("config has " + std::to_string(request.config->size()) +
                                    " layers, evaluator has " + std::to_string(meta.layers));
            }
            resp.performance = evaluator.evaluate(*request.config, request.proxy_steps.value_or(0));
            break;
        }
        case RequestType::distribution:
            if (!request.calib_index) {
                throw ProtocolError("distribution request without calib_index");
            }
            resp.dist = evaluator.distribution(*request.calib_index, request.layer, request.bit);
            break;
        }
        resp.ok = true;
    } catch (const std::exception& e) {
        resp = Response{};
        resp.id = request.id;
        resp.ok = false;
        resp.error = e.what();
    }
    return resp;
}

void serve(Evaluator& evaluator, std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        Response resp;
        try {
            const json j = json::parse(line);
            try {
                resp = handle(evaluator, parse_request(j));
            } catch (const ProtocolError& e) {
                resp.id = j.is_object() && j.contains("id") && j["id"].is_number_unsigned()
                              ? j["id"].get<std::uint64_t>()
                              : 0;
                resp.ok = false;
                resp.error = e.what();
            }
        } catch (const json::parse_error& e) {
            resp.ok = false;
            resp.error = std::string("malformed request: ") + e.what();
        }
        out << to_json(resp).dump() << '\n' << std::flush;
    }
}

} // namespace qradapt::protocol
