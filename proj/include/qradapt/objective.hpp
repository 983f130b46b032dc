// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qradapt/config_space.hpp"
#include "qradapt/evaluator.hpp"

#include <cstddef>
#include <map>
#include <mutex>
#include <vector>

namespace qradapt {

struct ObjectiveStats {
    std::size_t evaluator_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t failures = 0;
    long long proxy_steps_total = 0;
};

/// Prices and scores configurations through an Evaluator, memoizing by
/// config. Evaluations are deterministic, so a cached result is exact.
/// EvaluationError from the evaluator yields a failed EvalResult; any other
/// exception propagates.
class Objective {
public:
    Objective(Evaluator& evaluator, ModelGeometry geometry, SearchSpace space, int proxy_steps,
              std::size_t parallel = 1);

    EvalResult evaluate(const ModelConfig& config);

    /// Evaluates in index order when parallel == 1; otherwise distinct
    /// uncached configs are spread over up to `parallel` workers.
    std::vector<EvalResult> evaluate_batch(const std::vector<ModelConfig>& configs);

    bool is_cached(const ModelConfig& config) const;

    const ModelGeometry& geometry() const { return geometry_; }
    const SearchSpace& space() const { return space_; }
    int proxy_steps() const { return proxy_steps_; }
    Evaluator& evaluator() { return evaluator_; }
    ObjectiveStats stats() const;

private:
    EvalResult compute(const ModelConfig& config);

    Evaluator& evaluator_;
    ModelGeometry geometry_;
    SearchSpace space_;
    int proxy_steps_;
    std::size_t parallel_;

    mutable std::mutex mutex_;
    std::map<ModelConfig, EvalResult> cache_;
    ObjectiveStats stats_;
};

} // namespace qradapt
