// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qradapt/synthetic.hpp"

#include "qradapt/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

namespace qradapt {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ splitmix64(v)); }

// Uniform in (0, 1), never exactly 0.
double to_unit(std::uint64_t h) {
    return (static_cast<double>(h >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

double hashed_normal(std::uint64_t h) {
    const double u1 = to_unit(splitmix64(h));
    const double u2 = to_unit(splitmix64(h ^ 0xA5A5A5A5A5A5A5A5ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

constexpr std::uint64_t kLogitStream = 0x6C6F67697473ULL;
constexpr std::uint64_t kDirectionStream = 0x646972656374ULL;
constexpr std::uint64_t kNoiseStream = 0x6E6F697365ULL;

std::vector<double> softmax(const std::vector<double>& logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        sum += out[i];
    }
    for (double& v : out) {
        v /= sum;
    }
    return out;
}

} // namespace

double quant_noise(int bit) {
    if (bit < 1) {
        throw StructuralError("quant_noise: bit-width must be at least 1");
    }
    return std::exp2(-(bit - 1));
}

double layer_score(const LayerConfig& lc, double task_demand, double alpha, double beta,
                   int max_rank) {
    const double noise = quant_noise(lc.bit);
    const double demand = alpha * noise + beta * task_demand;
    const double supply = static_cast<double>(lc.rank) / max_rank + (1.0 - noise);
    return 1.0 / (1.0 + std::exp(-kScoreSharpness * (supply - demand)));
}

void SyntheticModel::validate() const {
    if (task_demand.empty()) {
        throw StructuralError("synthetic model needs at least one layer");
    }
    for (double t : task_demand) {
        if (!(t >= 0.0 && t <= 1.0)) {
            throw StructuralError("synthetic model: task demand must lie in [0, 1]");
        }
    }
    if (alpha <= 0.0 || beta <= 0.0 || noise_scale < 0.0 || max_rank <= 0 || dist_dim < 2 ||
        calib_size == 0) {
        throw StructuralError("synthetic model: invalid coefficients");
    }
}

SyntheticModel SyntheticModel::ramp(std::size_t num_layers) {
    SyntheticModel model;
    model.task_demand.resize(num_layers);
    for (std::size_t l = 0; l < num_layers; ++l) {
        model.task_demand[l] =
            num_layers == 1 ? 1.0 : static_cast<double>(l) / static_cast<double>(num_layers - 1);
    }
    return model;
}

double synthetic_evaluate(const SyntheticModel& model, const ModelConfig& config,
                          int proxy_steps) {
    if (config.size() != model.layers()) {
        throw StructuralError("synthetic_evaluate: config has " + std::to_string(config.size()) +
                              " layers, model has " + std::to_string(model.layers()));
    }
    double weight_total = 0.0;
    for (double t : model.task_demand) {
        weight_total += 1.0 + t;
    }
    double base = 0.0;
    for (std::size_t l = 0; l < config.size(); ++l) {
        const double t = model.task_demand[l];
        base += (1.0 + t) / weight_total *
                layer_score(config[l], t, model.alpha, model.beta, model.max_rank);
    }

    const double steps = std::max(0, proxy_steps);
    const double attenuation =
        (1.0 - std::exp(-steps / kProxyTau)) / (1.0 - std::exp(-kProxyStepsFull / kProxyTau));
    double score = std::min(base, base * attenuation);

    if (model.noise_scale > 0.0) {
        std::uint64_t h = mix(model.seed, kNoiseStream);
        for (const auto& lc : config.layers) {
            h = mix(h, static_cast<std::uint64_t>(lc.bit));
            h = mix(h, static_cast<std::uint64_t>(lc.rank));
        }
        score += model.noise_scale * (2.0 * to_unit(h) - 1.0);
    }
    return score;
}

std::vector<double> synthetic_distribution(const SyntheticModel& model, std::size_t calib_index,
                                           std::optional<std::size_t> layer,
                                           std::optional<int> bit) {
    if (calib_index >= model.calib_size) {
        throw StructuralError("calibration index " + std::to_string(calib_index) +
                              " out of range");
    }
    const std::uint64_t base_key = mix(mix(model.seed, kLogitStream), calib_index);
    std::vector<double> logits(model.dist_dim);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        logits[i] = hashed_normal(mix(base_key, i));
    }
    if (layer) {
        if (*layer >= model.layers()) {
            throw StructuralError("perturbed layer " + std::to_string(*layer) + " out of range");
        }
        // One direction per calibration input, shared by all layers, so the
        // induced divergence depends on the layer only through its magnitude.
        const std::uint64_t dir_key = mix(mix(model.seed, kDirectionStream), calib_index);
        std::vector<double> direction(model.dist_dim);
        double norm = 0.0;
        for (std::size_t i = 0; i < direction.size(); ++i) {
            direction[i] = hashed_normal(mix(dir_key, i));
            norm += direction[i] * direction[i];
        }
        norm = std::sqrt(norm);
        if (!bit) {
            throw StructuralError("perturbed layer given without a bit-width");
        }
        const double magnitude =
            model.displacement_scale * model.task_demand[*layer] * quant_noise(*bit);
        for (std::size_t i = 0; i < logits.size(); ++i) {
            logits[i] += magnitude * direction[i] / norm;
        }
    }
    return softmax(logits);
}

LayerGeometry transformer_layer_geometry(std::int64_t hidden, std::int64_t ffn) {
    LayerGeometry g;
    g.frozen_params = 4 * hidden * hidden + 2 * hidden * ffn;
    g.adapter_in_dims = {hidden, hidden, hidden, hidden, hidden, ffn};
    g.adapter_out_dims = {hidden, hidden, hidden, hidden, ffn, hidden};
    return g;
}

std::vector<PilotConfig> pilot_configs(std::size_t num_layers) {
    if (num_layers < 2 || num_layers % 2 != 0) {
        throw StructuralError("pilot study needs an even number of layers");
    }
    const std::size_t half = num_layers / 2;
    auto split = [&](LayerConfig shallow, LayerConfig deep) {
        ModelConfig c = ModelConfig::uniform(num_layers, shallow.bit, shallow.rank);
        for (std::size_t l = half; l < num_layers; ++l) {
            c[l] = deep;
        }
        return c;
    };
    return {
        {"A", "uniform 2-bit, rank 8", ModelConfig::uniform(num_layers, 2, 8)},
        {"B", "uniform 4-bit, rank 8", ModelConfig::uniform(num_layers, 4, 8)},
        {"C", "shallow 4-bit rank 8, deep 2-bit rank 16", split({4, 8}, {2, 16})},
        {"D", "shallow 2-bit rank 16, deep 4-bit rank 8", split({2, 16}, {4, 8})},
    };
}

SyntheticEvaluator::SyntheticEvaluator(SyntheticModel model, ModelGeometry geometry)
    : model_(std::move(model)), geometry_(std::move(geometry)) {
    model_.validate();
    geometry_.validate();
    if (geometry_.size() != model_.layers()) {
        throw StructuralError("synthetic evaluator: geometry and model layer counts differ");
    }
}

SyntheticEvaluator SyntheticEvaluator::make_default(std::size_t num_layers, std::uint64_t seed) {
    auto model = SyntheticModel::ramp(num_layers);
    model.seed = seed;
    return SyntheticEvaluator(std::move(model),
                              ModelGeometry::uniform(num_layers, transformer_layer_geometry(256, 1024)));
}

EvaluatorMeta SyntheticEvaluator::meta() const {
    return EvaluatorMeta{model_.layers(), model_.calib_size, geometry_};
}

double SyntheticEvaluator::evaluate(const ModelConfig& config, int proxy_steps) {
    return synthetic_evaluate(model_, config, proxy_steps);
}

std::vector<double> SyntheticEvaluator::distribution(std::size_t calib_index,
                                                     std::optional<std::size_t> layer,
                                                     std::optional<int> bit) {
    return synthetic_distribution(model_, calib_index, layer, bit);
}

std::size_t SyntheticEvaluator::max_concurrency() const {
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace qradapt
