// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qradapt/evolve.hpp"

#include "qradapt/error.hpp"
#include "qradapt/profiling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace qradapt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kUnranked = std::numeric_limits<std::size_t>::max();

bool coin(double prob, Rng& rng) {
    if (prob <= 0.0) {
        return false;
    }
    if (prob >= 1.0) {
        return true;
    }
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < prob;
}

// One step up or down in a sorted value list; endpoints move inward.
int neighbor_step(const std::vector<int>& values, std::size_t index, Rng& rng) {
    if (values.size() == 1) {
        return values[0];
    }
    if (index == 0) {
        return values[1];
    }
    if (index + 1 == values.size()) {
        return values[index - 1];
    }
    return std::bernoulli_distribution(0.5)(rng) ? values[index + 1] : values[index - 1];
}

bool better(const Individual& a, std::size_t ia, const Individual& b, std::size_t ib) {
    if (a.rank != b.rank) {
        return a.rank < b.rank;
    }
    if (a.crowding != b.crowding) {
        return a.crowding > b.crowding;
    }
    return ia < ib;
}

double best_feasible(std::span<const Individual> archive, std::uint64_t budget) {
    double best = -kInf;
    for (const auto& ind : archive) {
        if (ind.ok() && ind.result->memory_bytes <= budget) {
            best = std::max(best, ind.result->performance);
        }
    }
    return best;
}

} // namespace

void EvolveParams::validate() const {
    if (population_size < 2) {
        throw StructuralError("evolve: population size must be at least 2");
    }
    if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0) ||
        !(mutation_prob_per_layer >= 0.0 && mutation_prob_per_layer <= 1.0)) {
        throw StructuralError("evolve: probabilities must lie in [0, 1]");
    }
    if (tournament_size < 1) {
        throw StructuralError("evolve: tournament size must be at least 1");
    }
}

Fronts non_dominated_sort(std::span<const EvalResult> results) {
    const std::size_t n = results.size();
    std::vector<std::vector<std::size_t>> dominated_by_me(n);
    std::vector<std::size_t> domination_count(n, 0);
    Fronts fronts;
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dominates(results[i], results[j])) {
                dominated_by_me[i].push_back(j);
                ++domination_count[j];
            } else if (dominates(results[j], results[i])) {
                dominated_by_me[j].push_back(i);
                ++domination_count[i];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (domination_count[i] == 0) {
            current.push_back(i);
        }
    }
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (std::size_t i : current) {
            for (std::size_t j : dominated_by_me[i]) {
                if (--domination_count[j] == 0) {
                    next.push_back(j);
                }
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(current));
        current = std::move(next);
    }
    return fronts;
}

std::vector<double> crowding_distance(std::span<const EvalResult> front) {
    const std::size_t n = front.size();
    std::vector<double> distance(n, 0.0);
    if (n <= 2) {
        std::fill(distance.begin(), distance.end(), kInf);
        return distance;
    }
    auto accumulate = [&](auto value) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
        distance[order.front()] = kInf;
        distance[order.back()] = kInf;
        const double range = value(order.back()) - value(order.front());
        if (range <= 0.0) {
            return;
        }
        for (std::size_t k = 1; k + 1 < n; ++k) {
            distance[order[k]] += (value(order[k + 1]) - value(order[k - 1])) / range;
        }
    };
    accumulate([&](std::size_t i) { return front[i].performance; });
    accumulate([&](std::size_t i) { return static_cast<double>(front[i].memory_bytes); });
    return distance;
}

ModelConfig layerwise_crossover(const ModelConfig& a, const ModelConfig& b, double prob,
                                Rng& rng) {
    if (a.size() != b.size()) {
        throw StructuralError("layerwise_crossover: parents differ in layer count");
    }
    if (!coin(prob, rng)) {
        return a;
    }
    ModelConfig child = a;
    std::bernoulli_distribution pick_b(0.5);
    for (std::size_t l = 0; l < child.size(); ++l) {
        if (pick_b(rng)) {
            child[l] = b[l];
        }
    }
    return child;
}

ModelConfig proximity_mutation(const ModelConfig& c, const SearchSpace& space,
                               double prob_per_layer, Rng& rng) {
    ModelConfig out = c;
    for (auto& lc : out.layers) {
        if (!coin(prob_per_layer, rng)) {
            continue;
        }
        lc.bit = neighbor_step(space.bits(), space.bit_index(lc.bit), rng);
        lc.rank = neighbor_step(space.ranks(), space.rank_index(lc.rank), rng);
    }
    return out;
}

ModelConfig uniform_mutation(const ModelConfig& c, const SearchSpace& space,
                             double prob_per_layer, Rng& rng) {
    ModelConfig out = c;
    std::uniform_int_distribution<std::size_t> bit_pick(0, space.bits().size() - 1);
    std::uniform_int_distribution<std::size_t> rank_pick(0, space.ranks().size() - 1);
    for (auto& lc : out.layers) {
        if (!coin(prob_per_layer, rng)) {
            continue;
        }
        lc.bit = space.bits()[bit_pick(rng)];
        lc.rank = space.ranks()[rank_pick(rng)];
    }
    return out;
}

std::size_t tournament_select(std::span<const Individual> pop, std::size_t k, Rng& rng) {
    if (pop.empty()) {
        throw StructuralError("tournament_select: empty population");
    }
    k = std::clamp<std::size_t>(k, 1, pop.size());
    std::vector<std::size_t> indices(pop.size());
    std::iota(indices.begin(), indices.end(), 0);
    // Partial Fisher-Yates: the first k entries become a uniform sample without replacement.
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, indices.size() - 1);
        std::swap(indices[i], indices[pick(rng)]);
    }
    std::size_t winner = indices[0];
    for (std::size_t i = 1; i < k; ++i) {
        const std::size_t cand = indices[i];
        if (better(pop[cand], cand, pop[winner], winner)) {
            winner = cand;
        }
    }
    return winner;
}

void assign_rank_and_crowding(std::vector<Individual>& pop) {
    std::vector<std::size_t> ok_index;
    std::vector<EvalResult> results;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        if (pop[i].ok()) {
            ok_index.push_back(i);
            results.push_back(*pop[i].result);
        } else {
            pop[i].rank = kUnranked;
            pop[i].crowding = 0.0;
        }
    }
    const Fronts fronts = non_dominated_sort(results);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
        std::vector<EvalResult> members;
        for (std::size_t i : fronts[f]) {
            members.push_back(results[i]);
        }
        const auto crowding = crowding_distance(members);
        for (std::size_t k = 0; k < fronts[f].size(); ++k) {
            Individual& ind = pop[ok_index[fronts[f][k]]];
            ind.rank = f;
            ind.crowding = crowding[k];
        }
    }
}

std::vector<Individual> environmental_select(std::vector<Individual> pool, std::size_t count) {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return better(pool[a], a, pool[b], b);
    });
    std::vector<Individual> survivors;
    std::vector<std::size_t> leftovers;
    std::set<ModelConfig> seen;
    for (std::size_t i : order) {
        if (survivors.size() < count && seen.insert(pool[i].config).second) {
            survivors.push_back(pool[i]);
        } else {
            leftovers.push_back(i);
        }
    }
    for (std::size_t i : leftovers) {
        if (survivors.size() >= count) {
            break;
        }
        survivors.push_back(pool[i]);
    }
    return survivors;
}

std::vector<Individual> pareto_front(std::span<const Individual> individuals,
                                     std::uint64_t budget_bytes) {
    std::vector<const Individual*> feasible;
    std::vector<EvalResult> results;
    for (const auto& ind : individuals) {
        if (ind.ok() && ind.result->memory_bytes <= budget_bytes) {
            feasible.push_back(&ind);
            results.push_back(*ind.result);
        }
    }
    std::vector<Individual> front;
    if (results.empty()) {
        return front;
    }
    const Fronts fronts = non_dominated_sort(results);
    const auto crowding = [&] {
        std::vector<EvalResult> members;
        for (std::size_t i : fronts[0]) {
            members.push_back(results[i]);
        }
        return crowding_distance(members);
    }();
    for (std::size_t k = 0; k < fronts[0].size(); ++k) {
        Individual ind = *feasible[fronts[0][k]];
        ind.rank = 0;
        ind.crowding = crowding[k];
        front.push_back(std::move(ind));
    }
    return front;
}

EvolveOutcome evolve(const ModelConfig& seed, const EvolveParams& params, Objective& objective,
                     std::uint64_t budget_bytes, std::span<const double> repair_priority) {
    params.validate();
    const SearchSpace& space = objective.space();
    const ModelGeometry& geometry = objective.geometry();
    space.validate(seed);
    Rng rng(params.rng_seed);

    auto mutate = [&](const ModelConfig& c) {
        return params.mutation == MutationKind::proximity
                   ? proximity_mutation(c, space, params.mutation_prob_per_layer, rng)
                   : uniform_mutation(c, space, params.mutation_prob_per_layer, rng);
    };
    auto repair = [&](ModelConfig& c) {
        if (!repair_to_budget(c, repair_priority, space, geometry, budget_bytes)) {
            throw BudgetError("budget is below the minimum achievable footprint");
        }
    };

    EvolveOutcome out;
    std::set<ModelConfig> archived;
    auto evaluate_all = [&](std::vector<ModelConfig> configs) {
        const auto results = objective.evaluate_batch(configs);
        std::vector<Individual> inds;
        for (std::size_t i = 0; i < configs.size(); ++i) {
            Individual ind{configs[i], results[i]};
            if (archived.insert(configs[i]).second) {
                out.archive.push_back(ind);
            }
            inds.push_back(std::move(ind));
        }
        return inds;
    };
    auto record = [&](std::size_t generation) {
        const auto front = pareto_front(out.archive, budget_bytes);
        out.trace.push_back(GenerationRecord{generation, best_feasible(out.archive, budget_bytes),
                                             front.size(), objective.stats().evaluator_calls});
    };

    // Initial population: the seed plus distinct mutants of it. When the
    // per-layer rate leaves a mutant unchanged, one random layer is forced to move.
    ModelConfig start = seed;
    repair(start);
    std::vector<ModelConfig> initial{start};
    std::set<ModelConfig> initial_set{start};
    std::uniform_int_distribution<std::size_t> layer_pick(0, start.size() - 1);
    constexpr int kAttempts = 32;
    while (initial.size() < params.population_size) {
        ModelConfig mutant = start;
        for (int attempt = 0; attempt < kAttempts; ++attempt) {
            mutant = mutate(start);
            if (mutant == start) {
                const std::size_t l = layer_pick(rng);
                ModelConfig single{{start[l]}};
                mutant[l] = params.mutation == MutationKind::proximity
                                ? proximity_mutation(single, space, 1.0, rng)[0]
                                : uniform_mutation(single, space, 1.0, rng)[0];
            }
            repair(mutant);
            if (!initial_set.contains(mutant)) {
                break;
            }
        }
        initial_set.insert(mutant);
        initial.push_back(std::move(mutant));
    }
    std::vector<Individual> population = evaluate_all(std::move(initial));
    assign_rank_and_crowding(population);
    record(0);

    const std::size_t n_offspring =
        params.offspring_per_generation == 0 ? params.population_size : params.offspring_per_generation;
    for (std::size_t gen = 1; gen <= params.generations; ++gen) {
        std::vector<ModelConfig> children;
        children.reserve(n_offspring);
        for (std::size_t i = 0; i < n_offspring; ++i) {
            const auto& a = population[tournament_select(population, params.tournament_size, rng)];
            const auto& b = population[tournament_select(population, params.tournament_size, rng)];
            ModelConfig child = mutate(layerwise_crossover(a.config, b.config, params.crossover_prob, rng));
            repair(child);
            children.push_back(std::move(child));
        }
        std::vector<Individual> pool = std::move(population);
        for (auto& child : evaluate_all(std::move(children))) {
            pool.push_back(std::move(child));
        }
        assign_rank_and_crowding(pool);
        population = environmental_select(std::move(pool), params.population_size);
        record(gen);
    }

    out.population = std::move(population);
    out.front = pareto_front(out.archive, budget_bytes);
    return out;
}

} // namespace qradapt
