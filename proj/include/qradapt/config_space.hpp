// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qradapt {

struct LayerConfig {
    int bit = 0;
    int rank = 0;

    auto operator<=>(const LayerConfig&) const = default;
};

/// Full-model chromosome: one (bit, rank) gene per layer.
struct ModelConfig {
    std::vector<LayerConfig> layers;

    std::size_t size() const { return layers.size(); }
    const LayerConfig& operator[](std::size_t i) const { return layers[i]; }
    LayerConfig& operator[](std::size_t i) { return layers[i]; }

    static ModelConfig uniform(std::size_t num_layers, int bit, int rank);

    auto operator<=>(const ModelConfig&) const = default;
};

/// Discrete admissible values for bit-width and adapter rank. Both lists are
/// kept strictly ascending; construction through `make` validates that.
class SearchSpace {
public:
    SearchSpace();
    static SearchSpace make(std::vector<int> bits, std::vector<int> ranks);

    const std::vector<int>& bits() const { return bits_; }
    const std::vector<int>& ranks() const { return ranks_; }

    int min_bit() const { return bits_.front(); }
    int max_bit() const { return bits_.back(); }
    int min_rank() const { return ranks_.front(); }
    int max_rank() const { return ranks_.back(); }
    // Lower median for even-sized sets.
    int median_bit() const { return bits_[(bits_.size() - 1) / 2]; }
    int median_rank() const { return ranks_[(ranks_.size() - 1) / 2]; }

    std::size_t bit_index(int bit) const;
    std::size_t rank_index(int rank) const;

    bool contains(const LayerConfig& lc) const;
    void validate(const ModelConfig& config) const;

private:
    SearchSpace(std::vector<int> bits, std::vector<int> ranks);

    std::vector<int> bits_;
    std::vector<int> ranks_;
};

struct LayerGeometry {
    std::int64_t frozen_params = 0;
    std::vector<std::int64_t> adapter_in_dims;
    std::vector<std::int64_t> adapter_out_dims;
    // Fixed per-layer cost for quantizer metadata; zero unless the user prices it.
    std::int64_t overhead_bytes = 0;

    void validate() const;
    // Adapter parameters per unit of rank: sum over adapted matrices of (in + out).
    std::int64_t adapter_params_per_rank() const;
};

struct ModelGeometry {
    std::vector<LayerGeometry> layers;
    std::int64_t adapter_bytes_per_param = 2;

    std::size_t size() const { return layers.size(); }
    void validate() const;
    std::int64_t total_frozen_params() const;

    static ModelGeometry uniform(std::size_t num_layers, const LayerGeometry& layer,
                                 std::int64_t adapter_bytes_per_param = 2);
};

/// A point in objective space: performance is maximized, memory minimized.
struct EvalResult {
    double performance = 0.0;
    std::uint64_t memory_bytes = 0;
    std::map<std::string, double> aux;
    bool failed = false;
    std::string error;

    bool ok() const;
};

std::uint64_t layer_memory(const LayerConfig& lc, const LayerGeometry& geom,
                           std::int64_t adapter_bytes_per_param);

std::uint64_t memory_footprint(const ModelConfig& config, const ModelGeometry& geom);

/// Frozen-parameter-weighted mean bit-width.
double average_bit(const ModelConfig& config, const ModelGeometry& geom);

/// Frozen-parameter-weighted mean rank (same weighting as average_bit).
double average_rank(const ModelConfig& config, const ModelGeometry& geom);

/// Unweighted mean rank across layers.
double mean_rank(const ModelConfig& config);

bool dominates(const EvalResult& a, const EvalResult& b);

} // namespace qradapt
