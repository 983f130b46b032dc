// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qradapt/config_space.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace qradapt {

struct EvaluatorMeta {
    std::size_t layers = 0;
    std::size_t calib_size = 0;
    ModelGeometry geometry;
};

/// Boundary between the search and the model being tuned.
///
/// `evaluate` returns a higher-is-better score and must be deterministic for a
/// given (config, proxy_steps). `distribution` returns the model's output
/// probability vector for one calibration input, optionally with a single
/// layer quantized to `bit` while all others stay at full precision.
/// Implementations throw EvaluationError for recoverable per-call failures.
class Evaluator {
public:
    virtual ~Evaluator() = default;

    virtual EvaluatorMeta meta() const = 0;
    virtual double evaluate(const ModelConfig& config, int proxy_steps) = 0;
    virtual std::vector<double> distribution(std::size_t calib_index,
                                             std::optional<std::size_t> layer,
                                             std::optional<int> bit) = 0;

    // Number of calls that may usefully run at once.
    virtual std::size_t max_concurrency() const { return 1; }
};

} // namespace qradapt
