// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qradapt/objective.hpp"

#include "qradapt/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <set>

namespace qradapt {

Objective::Objective(Evaluator& evaluator, ModelGeometry geometry, SearchSpace space,
                     int proxy_steps, std::size_t parallel)
    : evaluator_(evaluator), geometry_(std::move(geometry)), space_(std::move(space)),
      proxy_steps_(proxy_steps), parallel_(std::max<std::size_t>(1, parallel)) {
    geometry_.validate();
}

EvalResult Objective::compute(const ModelConfig& config) {
    space_.validate(config);
    EvalResult result;
    result.memory_bytes = memory_footprint(config, geometry_);
    try {
        result.performance = evaluator_.evaluate(config, proxy_steps_);
        if (!std::isfinite(result.performance)) {
            result.failed = true;
            result.error = "evaluator returned a non-finite performance";
        }
    } catch (const EvaluationError& e) {
        result.failed = true;
        result.error = e.what();
        result.performance = std::nan("");
    }
    return result;
}

EvalResult Objective::evaluate(const ModelConfig& config) {
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(config); it != cache_.end()) {
            ++stats_.cache_hits;
            return it->second;
        }
    }
    EvalResult result = compute(config);
    std::lock_guard lock(mutex_);
    auto [it, inserted] = cache_.emplace(config, result);
    if (inserted) {
        ++stats_.evaluator_calls;
        stats_.proxy_steps_total += proxy_steps_;
        if (result.failed) {
            ++stats_.failures;
        }
    }
    return it->second;
}

std::vector<EvalResult> Objective::evaluate_batch(const std::vector<ModelConfig>& configs) {
    const std::size_t workers = std::min(parallel_, evaluator_.max_concurrency());
    if (workers > 1) {
        std::vector<const ModelConfig*> pending;
        {
            std::lock_guard lock(mutex_);
            std::set<ModelConfig> seen;
            for (const auto& c : configs) {
                if (!cache_.contains(c) && seen.insert(c).second) {
                    pending.push_back(&c);
                }
            }
        }
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i = next++; i < pending.size(); i = next++) {
                evaluate(*pending[i]);
            }
        };
        std::vector<std::future<void>> futures;
        for (std::size_t w = 0; w < std::min(workers, pending.size()); ++w) {
            futures.push_back(std::async(std::launch::async, work));
        }
        for (auto& f : futures) {
            f.get();
        }
    }
    std::vector<EvalResult> out;
    out.reserve(configs.size());
    for (const auto& c : configs) {
        out.push_back(evaluate(c));
    }
    return out;
}

bool Objective::is_cached(const ModelConfig& config) const {
    std::lock_guard lock(mutex_);
    return cache_.contains(config);
}

ObjectiveStats Objective::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

} // namespace qradapt
