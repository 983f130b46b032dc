// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qradapt/profiling.hpp"

#include "qradapt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace qradapt {

namespace {

constexpr double kSumTolerance = 1e-6;
constexpr double kFloor = 1e-12;
constexpr double kSupportThreshold = 1e-6;

double checked_sum(std::span<const double> v, const char* name) {
    double sum = 0.0;
    for (double x : v) {
        if (!(x >= 0.0)) {
            throw StructuralError(std::string("kl_divergence: negative or NaN entry in ") + name);
        }
        sum += x;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
        throw StructuralError(std::string("kl_divergence: ") + name +
                              " does not sum to 1 (sum = " + std::to_string(sum) + ")");
    }
    return sum;
}

std::size_t floor_index(double p, std::size_t n) {
    const double raw = std::floor(p * static_cast<double>(n - 1));
    if (raw <= 0.0) {
        return 0;
    }
    return std::min(static_cast<std::size_t>(raw), n - 1);
}

} // namespace

SensitivityProfile SensitivityProfile::from_scores(std::vector<double> scores) {
    if (scores.empty()) {
        throw StructuralError("sensitivity profile needs at least one layer");
    }
    double total = 0.0;
    for (double s : scores) {
        if (!(s >= 0.0)) {
            throw StructuralError("sensitivity scores must be non-negative");
        }
        total += s;
    }
    SensitivityProfile profile;
    profile.normalized.resize(scores.size());
    if (total > 0.0 && std::isfinite(total)) {
        for (std::size_t l = 0; l < scores.size(); ++l) {
            profile.normalized[l] = scores[l] / total;
        }
    } else if (total > 0.0) {
        // Infinite scores share the mass equally.
        const auto n_inf = std::count_if(scores.begin(), scores.end(),
                                         [](double s) { return std::isinf(s); });
        for (std::size_t l = 0; l < scores.size(); ++l) {
            profile.normalized[l] = std::isinf(scores[l]) ? 1.0 / double(n_inf) : 0.0;
        }
    } else {
        profile.degenerate = true;
        std::fill(profile.normalized.begin(), profile.normalized.end(),
                  1.0 / static_cast<double>(scores.size()));
    }
    profile.scores = std::move(scores);
    return profile;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) {
        throw StructuralError("kl_divergence: length mismatch");
    }
    const double p_sum = checked_sum(p, "p");
    const double q_sum = checked_sum(q, "q");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = p[i] / p_sum;
        if (pi == 0.0) {
            continue;
        }
        const double qi = q[i] / q_sum;
        if (qi == 0.0 && pi > kSupportThreshold) {
            return std::numeric_limits<double>::infinity();
        }
        total += pi * std::log(pi / std::max(qi, kFloor));
    }
    return std::max(0.0, total);
}

SensitivityProfile sensitivity_profile(Evaluator& evaluator, const SearchSpace& space,
                                       std::size_t calib_size) {
    if (calib_size == 0) {
        throw StructuralError("sensitivity_profile: calibration size must be at least 1");
    }
    const EvaluatorMeta meta = evaluator.meta();
    if (calib_size > meta.calib_size) {
        throw StructuralError("sensitivity_profile: evaluator offers only " +
                              std::to_string(meta.calib_size) + " calibration inputs");
    }
    std::vector<std::vector<double>> reference(calib_size);
    for (std::size_t c = 0; c < calib_size; ++c) {
        reference[c] = evaluator.distribution(c, std::nullopt, std::nullopt);
    }
    std::vector<double> scores(meta.layers, 0.0);
    for (std::size_t l = 0; l < meta.layers; ++l) {
        double sum = 0.0;
        for (std::size_t c = 0; c < calib_size; ++c) {
            const auto perturbed = evaluator.distribution(c, l, space.min_bit());
            sum += kl_divergence(reference[c], perturbed);
        }
        scores[l] = sum / static_cast<double>(calib_size);
    }
    return SensitivityProfile::from_scores(std::move(scores));
}

ModelConfig seed_configuration(const SensitivityProfile& profile, const SearchSpace& space) {
    if (profile.normalized.empty()) {
        throw StructuralError("seed_configuration: empty profile");
    }
    const auto& bits = space.bits();
    const auto& ranks = space.ranks();
    ModelConfig seed;
    seed.layers.reserve(profile.size());
    for (double p : profile.normalized) {
        seed.layers.push_back(
            LayerConfig{bits[floor_index(p, bits.size())], ranks[floor_index(p, ranks.size())]});
    }
    return seed;
}

ModelConfig median_configuration(std::size_t num_layers, const SearchSpace& space) {
    return ModelConfig::uniform(num_layers, space.median_bit(), space.median_rank());
}

bool repair_to_budget(ModelConfig& config, std::span<const double> priority,
                      const SearchSpace& space, const ModelGeometry& geometry,
                      std::uint64_t budget_bytes) {
    if (priority.size() != config.size()) {
        throw StructuralError("repair_to_budget: priority length does not match config");
    }
    std::vector<std::size_t> order(config.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return priority[a] < priority[b]; });

    while (memory_footprint(config, geometry) > budget_bytes) {
        bool stepped = false;
        for (std::size_t l : order) {
            LayerConfig& lc = config[l];
            if (lc.bit > space.min_bit()) {
                lc.bit = space.bits()[space.bit_index(lc.bit) - 1];
                stepped = true;
            } else if (lc.rank > space.min_rank()) {
                lc.rank = space.ranks()[space.rank_index(lc.rank) - 1];
                stepped = true;
            }
            if (stepped) {
                break;
            }
        }
        if (!stepped) {
            return false;
        }
    }
    return true;
}

} // namespace qradapt
