// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qradapt/bayes.hpp"
#include "qradapt/config_space.hpp"
#include "qradapt/evaluator.hpp"
#include "qradapt/evolve.hpp"
#include "qradapt/objective.hpp"
#include "qradapt/profiling.hpp"
#include "qradapt/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qradapt {

struct SyntheticSpec {
    std::size_t layers = kDefaultSyntheticLayers;
    std::optional<std::vector<double>> task_demand; // default: linear ramp 0 -> 1
    double alpha = 1.0;
    double beta = 1.0;
    double noise_scale = 0.0;
    std::size_t calib_size = 16;
    std::size_t dist_dim = 32;
    std::uint64_t model_seed = 0;
};

struct RunSpec {
    SearchSpace space;
    std::optional<ModelGeometry> geometry; // overrides the evaluator's own geometry
    std::optional<std::uint64_t> budget_bytes;
    std::optional<double> budget_avg_bits;
    EvolveParams evolve;
    std::size_t bo_iters_per_config = 5;
    int proxy_steps = kProxyStepsFull;
    std::optional<std::size_t> calib_size; // default: everything the evaluator offers

    SyntheticSpec synthetic;
    std::vector<std::string> evaluator_command; // empty selects the synthetic evaluator
    std::chrono::milliseconds evaluate_timeout{600'000};

    bool skip_phase1 = false;
    bool skip_phase2 = false;
    bool skip_phase3 = false;
    bool uniform_baseline = true;

    std::filesystem::path report_dir;
    std::uint64_t seed = 0;
    bool deterministic = false;
    std::size_t parallel = 1;

    void validate() const;
};

/// Hyperparameter presets: "appendix" (population 10, full offspring batch)
/// and "main-text" (population 5, one offspring per generation).
void apply_preset(RunSpec& spec, const std::string& name);

/// Bytes for a target average bit-width: frozen weights at `avg_bits`
/// (rounded up per layer) plus adapters at the space's median rank.
std::uint64_t budget_from_avg_bits(double avg_bits, const SearchSpace& space,
                                   const ModelGeometry& geometry);

std::uint64_t resolve_budget(const RunSpec& spec, const ModelGeometry& geometry);

std::unique_ptr<Evaluator> make_evaluator(const RunSpec& spec);

struct TraceRow {
    std::string phase; // "seed", "evolve", "refine"
    std::size_t step = 0;
    double best_performance = 0.0;
    std::size_t evaluations = 0;
};

struct UniformBaseline {
    LayerConfig layer;
    double performance = 0.0;
    std::uint64_t memory_bytes = 0;
};

struct RunReport {
    std::uint64_t budget_bytes = 0;
    SearchSpace space;
    ModelGeometry geometry;
    bool phase1 = true;
    bool phase2 = true;
    bool phase3 = true;
    std::uint64_t seed = 0;

    std::optional<SensitivityProfile> profile;
    std::optional<Individual> seed_individual;
    std::vector<TraceRow> trace;
    std::vector<GenerationRecord> generations;
    std::vector<RefineRound> refine_rounds;
    std::vector<Individual> front; // sorted by descending performance
    std::optional<Individual> best;
    std::optional<double> pearson_r;
    std::optional<UniformBaseline> uniform_best;
    std::size_t baseline_evaluations = 0;
    ObjectiveStats stats; // search phases only
    std::size_t archive_size = 0;
    std::vector<std::string> warnings;
    std::vector<std::string> errors;

    bool succeeded() const { return best.has_value() && errors.empty(); }
};

/// Runs the enabled phases in order against `evaluator`.
RunReport run(const RunSpec& spec, Evaluator& evaluator);

/// Sample Pearson correlation; throws NumericError on zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Best feasible uniform (bit, rank) config, by exhaustive sweep.
std::optional<UniformBaseline> uniform_sweep(Objective& objective, std::uint64_t budget_bytes);

/// Writes profile.csv, trace.csv, pareto.csv, allocation.csv,
/// best_config.json and summary.json into `dir`, each via rename, plus the
/// per-generation (generations.csv) and per-round (refine.csv) records.
void emit_reports(const RunReport& report, const std::filesystem::path& dir);

nlohmann::json summary_json(const RunReport& report);

} // namespace qradapt
