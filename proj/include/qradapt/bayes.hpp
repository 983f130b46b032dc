// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "qradapt/config_space.hpp"
#include "qradapt/evolve.hpp"
#include "qradapt/objective.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qradapt {

/// Continuous embedding of a config: per layer (log2(bit)/log2(max bit), rank/max rank).
using Encoding = std::vector<double>;

Encoding encode(const ModelConfig& config, const SearchSpace& space);

/// Matérn-5/2 kernel with per-dimension lengthscales.
double matern52(std::span<const double> x, std::span<const double> z,
                std::span<const double> lengthscales, double signal_variance);

struct GpOptions {
    double noise_variance = 1e-6;
    double max_noise_variance = 1e-2;
    double lengthscale_floor = 1e-3;
};

struct Posterior {
    double mean = 0.0;
    double variance = 0.0;
};

/// Gaussian-process regression over encodings. Targets are standardized
/// internally; lengthscales come from the per-dimension median of nonzero
/// pairwise gaps; signal variance is 1 in standardized space.
class GpModel {
public:
    static GpModel fit(std::vector<Encoding> xs, std::vector<double> ys,
                       const GpOptions& options = {});

    /// De-standardized posterior.
    Posterior posterior(std::span<const double> x) const;
    /// Posterior in standardized target units.
    Posterior standardized_posterior(std::span<const double> x) const;

    const std::vector<double>& lengthscales() const { return lengthscales_; }
    double signal_variance() const { return 1.0; }
    double noise_variance() const { return noise_variance_; }
    double y_mean() const { return y_mean_; }
    double y_scale() const { return y_scale_; }
    std::size_t dimension() const { return lengthscales_.size(); }
    std::size_t size() const { return train_x_.size(); }
    // Training inputs contained exact duplicates.
    bool degenerate() const { return degenerate_; }

private:
    std::vector<Encoding> train_x_;
    std::vector<double> train_y_;
    std::vector<double> lengthscales_;
    double noise_variance_ = 0.0;
    double y_mean_ = 0.0;
    double y_scale_ = 1.0;
    bool degenerate_ = false;
    Eigen::LLT<Eigen::MatrixXd> factor_;
    Eigen::VectorXd alpha_;
};

inline GpModel gp_fit(std::vector<Encoding> xs, std::vector<double> ys,
                      const GpOptions& options = {}) {
    return GpModel::fit(std::move(xs), std::move(ys), options);
}

/// E[max(0, f - y_best)] for f ~ N(mean, std^2).
double expected_improvement(double mean, double std, double y_best);

struct RefineParams {
    std::size_t iters_per_config = 5;
    std::size_t pool_limit = 512;
    // Sampled multi-layer proximity mutants of the pool center, and sampled
    // layerwise recombinations of the center with each other front member.
    std::size_t pool_mutants = 256;
    double pool_mutation_prob = 0.25;
    std::size_t pool_recombinations = 32;
    std::uint64_t rng_seed = 0;
    GpOptions gp;
};

struct RefineRound {
    std::size_t member = 0; // index into the incoming front
    std::size_t round = 0;
    ModelConfig candidate;
    double ei = 0.0;
    double performance = 0.0;
    bool failed = false;
    std::uint64_t memory_bytes = 0;
};

struct RefineOutcome {
    Individual best;
    std::vector<Individual> archive;
    std::vector<RefineRound> rounds;
    // Best feasible performance in the archive, and cumulative evaluator
    // calls, after each round.
    std::vector<double> best_trace;
    std::vector<std::size_t> evaluations_trace;
    std::vector<std::string> warnings;
};

/// Candidate pool around `center`: every config differing in a single layer
/// by at most one index step on each axis, single-layer transplants from each
/// of `others`, then `params.pool_mutants` sampled proximity mutants and
/// `params.pool_recombinations` sampled layerwise recombinations with each
/// of `others`. Deduplicated, budget-filtered, and stripped of configs in
/// `exclude`.
std::vector<ModelConfig> candidate_pool(const ModelConfig& center,
                                        std::span<const Individual> others,
                                        const SearchSpace& space, const ModelGeometry& geometry,
                                        std::uint64_t budget_bytes,
                                        std::span<const Individual> exclude,
                                        const RefineParams& params, Rng& rng);

/// GP-guided local refinement around each front member. Each member keeps a
/// local incumbent (the best config evaluated on its track) that serves as
/// the pool center; each round evaluates the argmax-EI candidate, adds it to
/// the archive, and refits. y_best is the global archive best.
RefineOutcome refine(std::span<const Individual> front, std::span<const Individual> archive,
                     const RefineParams& params, Objective& objective, std::uint64_t budget_bytes);

} // namespace qradapt
