// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qradapt/config_space.hpp"
#include "qradapt/objective.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace qradapt {

using Rng = std::mt19937_64;

struct Individual {
    ModelConfig config;
    std::optional<EvalResult> result;
    std::size_t rank = 0;  // front index, lower is better
    double crowding = 0.0; // may be +inf for boundary points

    bool ok() const { return result && result->ok(); }
};

enum class MutationKind {
    proximity,        // one index step per axis
    uniform_resample, // redraw bit and rank from the whole space
};

struct EvolveParams {
    std::size_t population_size = 10;
    std::size_t generations = 5;
    // Offspring produced per generation; 0 means population_size.
    std::size_t offspring_per_generation = 0;
    double crossover_prob = 0.9;
    double mutation_prob_per_layer = 0.1;
    std::size_t tournament_size = 2;
    MutationKind mutation = MutationKind::proximity;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

using Fronts = std::vector<std::vector<std::size_t>>;

/// Partitions results into successive Pareto fronts (indices into `results`).
Fronts non_dominated_sort(std::span<const EvalResult> results);

/// NSGA-II crowding distance within a single front.
std::vector<double> crowding_distance(std::span<const EvalResult> front);

/// With probability `prob`, each layer's (bit, rank) tuple is inherited whole
/// from a or b with equal odds; otherwise returns a copy of a.
ModelConfig layerwise_crossover(const ModelConfig& a, const ModelConfig& b, double prob, Rng& rng);

ModelConfig proximity_mutation(const ModelConfig& c, const SearchSpace& space,
                               double prob_per_layer, Rng& rng);

ModelConfig uniform_mutation(const ModelConfig& c, const SearchSpace& space,
                             double prob_per_layer, Rng& rng);

/// k distinct contestants drawn uniformly; lowest rank wins, then larger
/// crowding, then lower index. Returns the winner's index.
std::size_t tournament_select(std::span<const Individual> pop, std::size_t k, Rng& rng);

/// Assigns rank and crowding to every successful individual in place.
/// Failed individuals get rank = SIZE_MAX and crowding 0.
void assign_rank_and_crowding(std::vector<Individual>& pop);

/// NSGA-II environmental selection: keeps `count` individuals ordered by
/// (rank, crowding desc, index). Repeated configs are dropped before
/// duplicates are considered for the remaining slots.
std::vector<Individual> environmental_select(std::vector<Individual> pool, std::size_t count);

struct GenerationRecord {
    std::size_t generation = 0;
    double best_performance = 0.0; // best feasible performance seen so far
    std::size_t front_size = 0;
    std::size_t evaluations = 0;   // cumulative evaluator calls
};

struct EvolveOutcome {
    std::vector<Individual> archive;    // every distinct evaluated config, in evaluation order
    std::vector<Individual> population; // final population
    std::vector<Individual> front;      // non-dominated, feasible members of the archive
    std::vector<GenerationRecord> trace;
};

/// Generational Pareto-ranking search. Offspring that exceed the budget are
/// repaired with repair_to_budget using `repair_priority`.
EvolveOutcome evolve(const ModelConfig& seed, const EvolveParams& params, Objective& objective,
                     std::uint64_t budget_bytes, std::span<const double> repair_priority);

/// Non-dominated, budget-feasible subset of successful individuals.
std::vector<Individual> pareto_front(std::span<const Individual> individuals,
                                     std::uint64_t budget_bytes);

} // namespace qradapt
