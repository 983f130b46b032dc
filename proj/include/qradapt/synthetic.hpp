// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qradapt/evaluator.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qradapt {

/// Quantization noise for a bit-width: 2^-(bit - 1).
double quant_noise(int bit);

/// Smooth version of the per-layer adaptation bound. Supply (rank share plus
/// retained fidelity) is compared against demand (weighted noise plus task
/// demand) through a logistic with sharpness 4, so the score is exactly 0.5
/// when the bound is met with equality.
double layer_score(const LayerConfig& lc, double task_demand, double alpha, double beta,
                   int max_rank);

inline constexpr double kScoreSharpness = 4.0;
inline constexpr double kProxyTau = 3.0;
inline constexpr int kProxyStepsFull = 10;

struct SyntheticModel {
    std::vector<double> task_demand; // one entry per layer, each in [0, 1]
    double alpha = 1.0;
    double beta = 1.0;
    double noise_scale = 0.0;
    std::size_t dist_dim = 32;
    std::size_t calib_size = 16;
    // Logit displacement per unit of task_demand * quant_noise.
    double displacement_scale = 4.0;
    int max_rank = 16;
    std::uint64_t seed = 0;

    std::size_t layers() const { return task_demand.size(); }
    void validate() const;

    /// Task demand ramping linearly from 0 (first layer) to 1 (last layer).
    static SyntheticModel ramp(std::size_t num_layers);
};

double synthetic_evaluate(const SyntheticModel& model, const ModelConfig& config,
                          int proxy_steps);

std::vector<double> synthetic_distribution(const SyntheticModel& model, std::size_t calib_index,
                                           std::optional<std::size_t> layer,
                                           std::optional<int> bit);

/// A transformer-block-shaped layer: four hidden x hidden attention projections
/// plus an up/down MLP pair, all adapted.
LayerGeometry transformer_layer_geometry(std::int64_t hidden, std::int64_t ffn);

inline constexpr std::size_t kDefaultSyntheticLayers = 8;

struct PilotConfig {
    std::string name;
    std::string description;
    ModelConfig config;
};

/// The four shallow/deep allocations of the pilot study; the first half of
/// the layers is "shallow". Requires an even layer count >= 2.
std::vector<PilotConfig> pilot_configs(std::size_t num_layers);

class SyntheticEvaluator final : public Evaluator {
public:
    SyntheticEvaluator(SyntheticModel model, ModelGeometry geometry);

    /// Default landscape: ramped task demand over kDefaultSyntheticLayers
    /// layers of a 256/1024 transformer block.
    static SyntheticEvaluator make_default(std::size_t num_layers = kDefaultSyntheticLayers,
                                           std::uint64_t seed = 0);

    const SyntheticModel& model() const { return model_; }

    EvaluatorMeta meta() const override;
    double evaluate(const ModelConfig& config, int proxy_steps) override;
    std::vector<double> distribution(std::size_t calib_index, std::optional<std::size_t> layer,
                                     std::optional<int> bit) override;
    std::size_t max_concurrency() const override;

private:
    SyntheticModel model_;
    ModelGeometry geometry_;
};

} // namespace qradapt
