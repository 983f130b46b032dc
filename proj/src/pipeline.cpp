// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qradapt/pipeline.hpp"

#include "qradapt/error.hpp"
#include "qradapt/external.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qradapt {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed ^ (stream * 0x9E3779B97F4A7C15ULL);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double best_feasible(std::span<const Individual> archive, std::uint64_t budget) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& ind : archive) {
        if (ind.ok() && ind.result->memory_bytes <= budget) {
            best = std::max(best, ind.result->performance);
        }
    }
    return best;
}

} // namespace

void RunSpec::validate() const {
    if (skip_phase1 && skip_phase2 && skip_phase3) {
        throw StructuralError("run spec: at least one phase must be enabled");
    }
    if (budget_bytes && budget_avg_bits) {
        throw StructuralError("run spec: give either a byte budget or an average-bit budget, not both");
    }
    if (budget_avg_bits && !(*budget_avg_bits > 0.0)) {
        throw StructuralError("run spec: average-bit budget must be positive");
    }
    if (proxy_steps < 0) {
        throw StructuralError("run spec: proxy steps must be non-negative");
    }
    evolve.validate();
}

void apply_preset(RunSpec& spec, const std::string& name) {
    if (name == "appendix") {
        spec.evolve.population_size = 10;
        spec.evolve.generations = 5;
        spec.evolve.offspring_per_generation = 0;
        spec.bo_iters_per_config = 5;
    } else if (name == "main-text") {
        spec.evolve.population_size = 5;
        spec.evolve.generations = 5;
        spec.evolve.offspring_per_generation = 1;
        spec.bo_iters_per_config = 5;
    } else {
        throw StructuralError("unknown preset '" + name + "' (expected appendix or main-text)");
    }
}

std::uint64_t budget_from_avg_bits(double avg_bits, const SearchSpace& space,
                                   const ModelGeometry& geometry) {
    std::uint64_t total = 0;
    const auto rank = static_cast<std::uint64_t>(space.median_rank());
    for (const auto& layer : geometry.layers) {
        total += static_cast<std::uint64_t>(
            std::ceil(static_cast<double>(layer.frozen_params) * avg_bits / 8.0));
        total += static_cast<std::uint64_t>(geometry.adapter_bytes_per_param) * rank *
                 static_cast<std::uint64_t>(layer.adapter_params_per_rank());
        total += static_cast<std::uint64_t>(layer.overhead_bytes);
    }
    return total;
}

std::uint64_t resolve_budget(const RunSpec& spec, const ModelGeometry& geometry) {
    std::uint64_t budget = 0;
    if (spec.budget_bytes) {
        budget = *spec.budget_bytes;
    } else {
        budget = budget_from_avg_bits(spec.budget_avg_bits.value_or(spec.space.median_bit()),
                                      spec.space, geometry);
    }
    const auto minimal = memory_footprint(
        ModelConfig::uniform(geometry.size(), spec.space.min_bit(), spec.space.min_rank()), geometry);
    if (budget <= minimal) {
        throw BudgetError("budget of " + std::to_string(budget) +
                          " bytes does not exceed the minimal footprint of " +
                          std::to_string(minimal) + " bytes");
    }
    return budget;
}

std::unique_ptr<Evaluator> make_evaluator(const RunSpec& spec) {
    if (!spec.evaluator_command.empty()) {
        ExternalOptions options;
        options.command = spec.evaluator_command;
        options.evaluate_timeout = spec.evaluate_timeout;
        options.connections = spec.deterministic ? 1 : std::max<std::size_t>(1, spec.parallel);
        return std::make_unique<ExternalEvaluator>(std::move(options));
    }
    const SyntheticSpec& syn = spec.synthetic;
    SyntheticModel model = SyntheticModel::ramp(syn.layers);
    if (syn.task_demand) {
        model.task_demand = *syn.task_demand;
    }
    model.alpha = syn.alpha;
    model.beta = syn.beta;
    model.noise_scale = syn.noise_scale;
    model.calib_size = syn.calib_size;
    model.dist_dim = syn.dist_dim;
    model.seed = syn.model_seed;
    model.max_rank = spec.space.max_rank();
    ModelGeometry geometry = spec.geometry.value_or(
        ModelGeometry::uniform(model.layers(), transformer_layer_geometry(256, 1024)));
    return std::make_unique<SyntheticEvaluator>(std::move(model), std::move(geometry));
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw StructuralError("pearson: need two equal-length samples of size >= 2");
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) {
        throw NumericError("pearson: correlation is undefined for a constant sample");
    }
    return sxy / std::sqrt(sxx * syy);
}

std::optional<UniformBaseline> uniform_sweep(Objective& objective, std::uint64_t budget_bytes) {
    const std::size_t layers = objective.geometry().size();
    std::optional<UniformBaseline> best;
    for (int bit : objective.space().bits()) {
        for (int rank : objective.space().ranks()) {
            const ModelConfig c = ModelConfig::uniform(layers, bit, rank);
            if (memory_footprint(c, objective.geometry()) > budget_bytes) {
                continue;
            }
            const EvalResult r = objective.evaluate(c);
            if (r.ok() && (!best || r.performance > best->performance)) {
                best = UniformBaseline{LayerConfig{bit, rank}, r.performance, r.memory_bytes};
            }
        }
    }
    return best;
}

RunReport run(const RunSpec& spec, Evaluator& evaluator) {
    spec.validate();
    const EvaluatorMeta meta = evaluator.meta();
    ModelGeometry geometry = spec.geometry.value_or(meta.geometry);
    geometry.validate();
    if (geometry.size() != meta.layers) {
        throw StructuralError("geometry has " + std::to_string(geometry.size()) +
                              " layers but the evaluator reports " + std::to_string(meta.layers));
    }

    RunReport report;
    report.space = spec.space;
    report.geometry = geometry;
    report.budget_bytes = resolve_budget(spec, geometry);
    report.phase1 = !spec.skip_phase1;
    report.phase2 = !spec.skip_phase2;
    report.phase3 = !spec.skip_phase3;
    report.seed = spec.seed;
    const std::uint64_t budget = report.budget_bytes;
    const std::size_t layers = geometry.size();

    Objective objective(evaluator, geometry, spec.space, spec.proxy_steps,
                        spec.deterministic ? 1 : spec.parallel);
    std::vector<Individual> archive;
    std::vector<Individual> front;

    try {
        // Phase I: sensitivity-guided seed, or the median config when skipped.
        ModelConfig seed;
        std::vector<double> priority(layers, 1.0 / static_cast<double>(layers));
        if (report.phase1) {
            report.profile = sensitivity_profile(evaluator, spec.space,
                                                 spec.calib_size.value_or(meta.calib_size));
            if (report.profile->degenerate) {
                report.warnings.push_back("sensitivity profile is all zero; using uniform weights");
            }
            seed = seed_configuration(*report.profile, spec.space);
            priority = report.profile->normalized;
        } else {
            seed = median_configuration(layers, spec.space);
        }
        if (!repair_to_budget(seed, priority, spec.space, geometry, budget)) {
            throw BudgetError("seed cannot be repaired to fit the budget");
        }
        Individual seed_ind{seed, objective.evaluate(seed)};
        report.seed_individual = seed_ind;
        archive.push_back(seed_ind);
        report.trace.push_back(TraceRow{"seed", 0, best_feasible(archive, budget),
                                        objective.stats().evaluator_calls});
        front = pareto_front(archive, budget);

        // Phase II
        if (report.phase2) {
            EvolveParams params = spec.evolve;
            params.rng_seed = derive_seed(spec.seed, 2);
            EvolveOutcome evo = evolve(seed, params, objective, budget, priority);
            archive = std::move(evo.archive);
            front = std::move(evo.front);
            report.generations = evo.trace;
            for (const auto& g : evo.trace) {
                report.trace.push_back(
                    TraceRow{"evolve", g.generation, g.best_performance, g.evaluations});
            }
        }

        // Phase III
        if (report.phase3 && !front.empty()) {
            RefineParams params;
            params.iters_per_config = spec.bo_iters_per_config;
            params.rng_seed = derive_seed(spec.seed, 3);
            RefineOutcome ref = refine(front, archive, params, objective, budget);
            for (std::size_t k = 0; k < ref.best_trace.size(); ++k) {
                report.trace.push_back(
                    TraceRow{"refine", k + 1, ref.best_trace[k], ref.evaluations_trace[k]});
            }
            report.refine_rounds = std::move(ref.rounds);
            report.warnings.insert(report.warnings.end(), ref.warnings.begin(), ref.warnings.end());
            archive = std::move(ref.archive);
        }
    } catch (const BudgetError&) {
        throw;
    } catch (const Error& e) {
        report.errors.push_back(e.what());
    }

    report.stats = objective.stats();
    report.archive_size = archive.size();
    if (report.stats.failures > 0) {
        report.warnings.push_back(std::to_string(report.stats.failures) + " evaluation(s) failed");
    }

    report.front = pareto_front(archive, budget);
    std::stable_sort(report.front.begin(), report.front.end(), [](const Individual& a, const Individual& b) {
        if (a.result->performance != b.result->performance) {
            return a.result->performance > b.result->performance;
        }
        return a.result->memory_bytes < b.result->memory_bytes;
    });
    if (!report.front.empty()) {
        report.best = report.front.front();
    }

    if (report.best && report.profile) {
        std::vector<double> bits;
        for (const auto& lc : report.best->config.layers) {
            bits.push_back(lc.bit);
        }
        try {
            report.pearson_r = pearson(bits, report.profile->scores);
        } catch (const Error& e) {
            report.warnings.push_back(std::string("bit/sensitivity correlation: ") + e.what());
        }
    }

    if (spec.uniform_baseline && report.errors.empty()) {
        try {
            report.uniform_best = uniform_sweep(objective, budget);
        } catch (const Error& e) {
            report.warnings.push_back(std::string("uniform baseline: ") + e.what());
        }
        report.baseline_evaluations = objective.stats().evaluator_calls - report.stats.evaluator_calls;
    }
    return report;
}

} // namespace qradapt
