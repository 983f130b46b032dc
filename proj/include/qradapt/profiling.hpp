// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qradapt/config_space.hpp"
#include "qradapt/evaluator.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace qradapt {

struct SensitivityProfile {
    std::vector<double> scores;     // raw per-layer sensitivity S_l
    std::vector<double> normalized; // S_l / sum(S), or uniform when the sum is zero
    bool degenerate = false;        // all scores were zero

    std::size_t size() const { return scores.size(); }

    static SensitivityProfile from_scores(std::vector<double> scores);
};

/// D_KL(p || q) in nats. Inputs are renormalized; q entries below 1e-12 are
/// floored, except that an exact zero in q against p > 1e-6 yields +infinity.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Mean per-input KL between the full-precision output distribution and the
/// one with only layer l quantized to the minimum bit-width.
SensitivityProfile sensitivity_profile(Evaluator& evaluator, const SearchSpace& space,
                                       std::size_t calib_size);

/// Deterministic seed: each layer's normalized score indexes both sorted
/// spaces via floor(p * (n - 1)).
ModelConfig seed_configuration(const SensitivityProfile& profile, const SearchSpace& space);

/// Every layer at the median bit and median rank.
ModelConfig median_configuration(std::size_t num_layers, const SearchSpace& space);

/// Brings `config` under `budget_bytes` by repeatedly stepping down the layer
/// with the lowest priority that is not yet at (min bit, min rank): its bit
/// first, then its rank. Ties go to the lower layer index. Returns false if
/// the all-minimum config still exceeds the budget.
bool repair_to_budget(ModelConfig& config, std::span<const double> priority,
                      const SearchSpace& space, const ModelGeometry& geometry,
                      std::uint64_t budget_bytes);

} // namespace qradapt
