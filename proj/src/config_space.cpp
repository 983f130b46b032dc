// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qradapt/config_space.hpp"

#include "qradapt/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qradapt {

namespace {

void check_ascending(const std::vector<int>& values, const char* what) {
    if (values.empty()) {
        throw StructuralError(std::string("search space: empty ") + what + " set");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] <= 0) {
            throw StructuralError(std::string("search space: non-positive ") + what);
        }
        if (i > 0 && values[i] <= values[i - 1]) {
            throw StructuralError(std::string("search space: ") + what +
                                  " must be strictly ascending");
        }
    }
}

std::size_t index_of(const std::vector<int>& values, int v, const char* what) {
    auto it = std::lower_bound(values.begin(), values.end(), v);
    if (it == values.end() || *it != v) {
        throw StructuralError(std::string(what) + " " + std::to_string(v) +
                              " is not in the search space");
    }
    return static_cast<std::size_t>(it - values.begin());
}

void check_lengths(const ModelConfig& config, const ModelGeometry& geom) {
    if (config.size() != geom.size()) {
        throw StructuralError("config has " + std::to_string(config.size()) +
                              " layers but geometry has " + std::to_string(geom.size()));
    }
}

} // namespace

ModelConfig ModelConfig::uniform(std::size_t num_layers, int bit, int rank) {
    return ModelConfig{std::vector<LayerConfig>(num_layers, LayerConfig{bit, rank})};
}

SearchSpace::SearchSpace() : SearchSpace({2, 4, 8}, {2, 4, 6, 8, 10, 12, 14, 16}) {}

SearchSpace::SearchSpace(std::vector<int> bits, std::vector<int> ranks)
    : bits_(std::move(bits)), ranks_(std::move(ranks)) {}

SearchSpace SearchSpace::make(std::vector<int> bits, std::vector<int> ranks) {
    check_ascending(bits, "bit-width");
    check_ascending(ranks, "rank");
    return SearchSpace(std::move(bits), std::move(ranks));
}

std::size_t SearchSpace::bit_index(int bit) const { return index_of(bits_, bit, "bit-width"); }

std::size_t SearchSpace::rank_index(int rank) const { return index_of(ranks_, rank, "rank"); }

bool SearchSpace::contains(const LayerConfig& lc) const {
    return std::binary_search(bits_.begin(), bits_.end(), lc.bit) &&
           std::binary_search(ranks_.begin(), ranks_.end(), lc.rank);
}

void SearchSpace::validate(const ModelConfig& config) const {
    if (config.size() == 0) {
        throw StructuralError("config has no layers");
    }
    for (std::size_t l = 0; l < config.size(); ++l) {
        if (!contains(config[l])) {
            throw StructuralError("layer " + std::to_string(l) + " (" +
                                  std::to_string(config[l].bit) + ", " +
                                  std::to_string(config[l].rank) +
                                  ") is outside the search space");
        }
    }
}

void LayerGeometry::validate() const {
    if (frozen_params < 0 || overhead_bytes < 0) {
        throw StructuralError("layer geometry: negative size");
    }
    if (adapter_in_dims.size() != adapter_out_dims.size()) {
        throw StructuralError("layer geometry: adapter in/out dimension lists differ in length");
    }
    for (std::size_t m = 0; m < adapter_in_dims.size(); ++m) {
        if (adapter_in_dims[m] <= 0 || adapter_out_dims[m] <= 0) {
            throw StructuralError("layer geometry: adapter dimensions must be positive");
        }
    }
}

std::int64_t LayerGeometry::adapter_params_per_rank() const {
    std::int64_t total = 0;
    for (std::size_t m = 0; m < adapter_in_dims.size(); ++m) {
        total += adapter_in_dims[m] + adapter_out_dims[m];
    }
    return total;
}

void ModelGeometry::validate() const {
    if (layers.empty()) {
        throw StructuralError("geometry has no layers");
    }
    if (adapter_bytes_per_param <= 0) {
        throw StructuralError("geometry: adapter_bytes_per_param must be positive");
    }
    for (const auto& layer : layers) {
        layer.validate();
    }
}

std::int64_t ModelGeometry::total_frozen_params() const {
    std::int64_t total = 0;
    for (const auto& layer : layers) {
        total += layer.frozen_params;
    }
    return total;
}

ModelGeometry ModelGeometry::uniform(std::size_t num_layers, const LayerGeometry& layer,
                                     std::int64_t adapter_bytes_per_param) {
    return ModelGeometry{std::vector<LayerGeometry>(num_layers, layer), adapter_bytes_per_param};
}

bool EvalResult::ok() const { return !failed && std::isfinite(performance); }

std::uint64_t layer_memory(const LayerConfig& lc, const LayerGeometry& geom,
                           std::int64_t adapter_bytes_per_param) {
    const auto frozen_bits = static_cast<std::uint64_t>(geom.frozen_params) *
                             static_cast<std::uint64_t>(lc.bit);
    const std::uint64_t frozen_bytes = (frozen_bits + 7) / 8;
    const auto adapter_bytes = static_cast<std::uint64_t>(adapter_bytes_per_param) *
                               static_cast<std::uint64_t>(lc.rank) *
                               static_cast<std::uint64_t>(geom.adapter_params_per_rank());
    return frozen_bytes + adapter_bytes + static_cast<std::uint64_t>(geom.overhead_bytes);
}

std::uint64_t memory_footprint(const ModelConfig& config, const ModelGeometry& geom) {
    check_lengths(config, geom);
    std::uint64_t total = 0;
    for (std::size_t l = 0; l < config.size(); ++l) {
        total += layer_memory(config[l], geom.layers[l], geom.adapter_bytes_per_param);
    }
    return total;
}

namespace {

template <typename Field>
double weighted_mean(const ModelConfig& config, const ModelGeometry& geom, Field field) {
    check_lengths(config, geom);
    double weighted = 0.0;
    double total = 0.0;
    for (std::size_t l = 0; l < config.size(); ++l) {
        const auto w = static_cast<double>(geom.layers[l].frozen_params);
        weighted += w * field(config[l]);
        total += w;
    }
    if (total <= 0.0) {
        throw StructuralError("average over zero frozen parameters is undefined");
    }
    return weighted / total;
}

} // namespace

double average_bit(const ModelConfig& config, const ModelGeometry& geom) {
    return weighted_mean(config, geom, [](const LayerConfig& lc) { return double(lc.bit); });
}

double average_rank(const ModelConfig& config, const ModelGeometry& geom) {
    return weighted_mean(config, geom, [](const LayerConfig& lc) { return double(lc.rank); });
}

double mean_rank(const ModelConfig& config) {
    if (config.size() == 0) {
        throw StructuralError("mean rank of an empty config is undefined");
    }
    double sum = 0.0;
    for (const auto& lc : config.layers) {
        sum += lc.rank;
    }
    return sum / static_cast<double>(config.size());
}

bool dominates(const EvalResult& a, const EvalResult& b) {
    const bool no_worse = a.performance >= b.performance && a.memory_bytes <= b.memory_bytes;
    const bool better = a.performance > b.performance || a.memory_bytes < b.memory_bytes;
    return no_worse && better;
}

} // namespace qradapt
