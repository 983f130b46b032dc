// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "qradapt/bayes.hpp"

#include "qradapt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

namespace qradapt {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873128;
constexpr double kGapEpsilon = 1e-12;

double median(std::vector<double> values) {
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

double feasible_best(std::span<const Individual> archive, std::uint64_t budget) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& ind : archive) {
        if (ind.ok() && ind.result->memory_bytes <= budget) {
            best = std::max(best, ind.result->performance);
        }
    }
    return best;
}

} // namespace

Encoding encode(const ModelConfig& config, const SearchSpace& space) {
    Encoding enc;
    enc.reserve(2 * config.size());
    const double log_max_bit = std::log2(static_cast<double>(space.max_bit()));
    for (const auto& lc : config.layers) {
        // A one-bit maximum has log2 = 0; fall back to the linear ratio.
        enc.push_back(log_max_bit > 0.0 ? std::log2(double(lc.bit)) / log_max_bit
                                        : double(lc.bit) / space.max_bit());
        enc.push_back(static_cast<double>(lc.rank) / space.max_rank());
    }
    return enc;
}

double matern52(std::span<const double> x, std::span<const double> z,
                std::span<const double> lengthscales, double signal_variance) {
    if (x.size() != z.size() || x.size() != lengthscales.size()) {
        throw StructuralError("matern52: dimension mismatch");
    }
    if (!(signal_variance > 0.0)) {
        throw StructuralError("matern52: signal variance must be positive");
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(lengthscales[i] > 0.0)) {
            throw StructuralError("matern52: lengthscales must be positive");
        }
        const double u = (x[i] - z[i]) / lengthscales[i];
        d2 += u * u;
    }
    const double d = std::sqrt(d2);
    return signal_variance * (1.0 + kSqrt5 * d + 5.0 * d2 / 3.0) * std::exp(-kSqrt5 * d);
}

GpModel GpModel::fit(std::vector<Encoding> xs, std::vector<double> ys, const GpOptions& options) {
    if (xs.empty() || xs.size() != ys.size()) {
        throw StructuralError("gp_fit: need at least one point and matching target count");
    }
    const std::size_t n = xs.size();
    const std::size_t dim = xs.front().size();
    for (const auto& x : xs) {
        if (x.size() != dim) {
            throw StructuralError("gp_fit: encodings differ in dimension");
        }
    }

    GpModel model;
    model.y_mean_ = std::accumulate(ys.begin(), ys.end(), 0.0) / double(n);
    double var = 0.0;
    for (double y : ys) {
        var += (y - model.y_mean_) * (y - model.y_mean_);
    }
    var /= double(n);
    model.y_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;

    model.lengthscales_.assign(dim, 1.0);
    for (std::size_t k = 0; k < dim; ++k) {
        std::vector<double> gaps;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double gap = std::abs(xs[i][k] - xs[j][k]);
                if (gap > kGapEpsilon) {
                    gaps.push_back(gap);
                }
            }
        }
        if (!gaps.empty()) {
            model.lengthscales_[k] = std::max(options.lengthscale_floor, median(std::move(gaps)));
        }
    }
    for (std::size_t i = 0; i < n && !model.degenerate_; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (xs[i] == xs[j]) {
                model.degenerate_ = true;
                break;
            }
        }
    }

    Eigen::MatrixXd gram(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double k = matern52(xs[i], xs[j], model.lengthscales_, 1.0);
            gram(Eigen::Index(i), Eigen::Index(j)) = k;
            gram(Eigen::Index(j), Eigen::Index(i)) = k;
        }
    }
    Eigen::VectorXd y_std(n);
    for (std::size_t i = 0; i < n; ++i) {
        y_std(Eigen::Index(i)) = (ys[i] - model.y_mean_) / model.y_scale_;
    }

    double noise = options.noise_variance;
    for (;;) {
        Eigen::MatrixXd k = gram;
        k.diagonal().array() += noise;
        model.factor_.compute(k);
        if (model.factor_.info() == Eigen::Success) {
            break;
        }
        noise = noise > 0.0 ? noise * 10.0 : 1e-10;
        if (noise > options.max_noise_variance * (1.0 + 1e-9)) {
            throw NumericError("gp_fit: covariance not positive definite after jitter escalation");
        }
    }
    model.noise_variance_ = noise;
    model.alpha_ = model.factor_.solve(y_std);
    model.train_x_ = std::move(xs);
    model.train_y_ = std::move(ys);
    return model;
}

Posterior GpModel::standardized_posterior(std::span<const double> x) const {
    if (x.size() != dimension()) {
        throw StructuralError("gp_posterior: query dimension mismatch");
    }
    const auto n = Eigen::Index(train_x_.size());
    Eigen::VectorXd k_star(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k_star(i) = matern52(x, train_x_[std::size_t(i)], lengthscales_, 1.0);
    }
    const double mean = k_star.dot(alpha_);
    const Eigen::VectorXd v = factor_.matrixL().solve(k_star);
    const double variance = std::max(0.0, 1.0 - v.squaredNorm());
    return Posterior{mean, variance};
}

Posterior GpModel::posterior(std::span<const double> x) const {
    const Posterior s = standardized_posterior(x);
    return Posterior{y_mean_ + y_scale_ * s.mean, y_scale_ * y_scale_ * s.variance};
}

double expected_improvement(double mean, double std, double y_best) {
    const double delta = mean - y_best;
    if (std <= 0.0) {
        return std::max(0.0, delta);
    }
    const double z = delta / std;
    const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    return std::max(0.0, delta * cdf + std * pdf);
}

std::vector<ModelConfig> candidate_pool(const ModelConfig& center,
                                        std::span<const Individual> others,
                                        const SearchSpace& space, const ModelGeometry& geometry,
                                        std::uint64_t budget_bytes,
                                        std::span<const Individual> exclude,
                                        const RefineParams& params, Rng& rng) {
    std::set<ModelConfig> seen{center};
    for (const auto& ind : exclude) {
        seen.insert(ind.config);
    }
    std::vector<ModelConfig> pool;
    auto offer = [&](const ModelConfig& c) {
        if (seen.insert(c).second && memory_footprint(c, geometry) <= budget_bytes) {
            pool.push_back(c);
        }
    };
    const auto& bits = space.bits();
    const auto& ranks = space.ranks();
    for (std::size_t l = 0; l < center.size(); ++l) {
        const auto bi = static_cast<long>(space.bit_index(center[l].bit));
        const auto ri = static_cast<long>(space.rank_index(center[l].rank));
        for (long db = -1; db <= 1; ++db) {
            for (long dr = -1; dr <= 1; ++dr) {
                const long nb = bi + db;
                const long nr = ri + dr;
                if ((db == 0 && dr == 0) || nb < 0 || nr < 0 || nb >= long(bits.size()) ||
                    nr >= long(ranks.size())) {
                    continue;
                }
                ModelConfig c = center;
                c[l] = LayerConfig{bits[std::size_t(nb)], ranks[std::size_t(nr)]};
                offer(c);
            }
        }
    }
    for (const auto& other : others) {
        if (other.config.size() != center.size()) {
            throw StructuralError("candidate_pool: front members differ in layer count");
        }
        for (std::size_t l = 0; l < center.size(); ++l) {
            if (other.config[l] != center[l]) {
                ModelConfig c = center;
                c[l] = other.config[l];
                offer(c);
            }
        }
    }
    for (std::size_t i = 0; i < params.pool_mutants; ++i) {
        offer(proximity_mutation(center, space, params.pool_mutation_prob, rng));
    }
    for (const auto& other : others) {
        for (std::size_t i = 0; i < params.pool_recombinations; ++i) {
            offer(layerwise_crossover(center, other.config, 1.0, rng));
        }
    }
    return pool;
}

RefineOutcome refine(std::span<const Individual> front, std::span<const Individual> archive,
                     const RefineParams& params, Objective& objective, std::uint64_t budget_bytes) {
    RefineOutcome out;
    out.archive.assign(archive.begin(), archive.end());
    Rng rng(params.rng_seed);

    auto pick_best = [&] {
        const Individual* best = nullptr;
        for (const auto& ind : out.archive) {
            if (ind.ok() && ind.result->memory_bytes <= budget_bytes &&
                (!best || ind.result->performance > best->result->performance)) {
                best = &ind;
            }
        }
        return best;
    };

    if (params.iters_per_config > 0 && front.empty()) {
        throw StructuralError("refine: empty front");
    }

    std::vector<std::size_t> order(front.size());
    std::iota(order.begin(), order.end(), 0);
    auto perf_of = [&](std::size_t i) {
        return front[i].ok() ? front[i].result->performance : -std::numeric_limits<double>::infinity();
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return perf_of(a) > perf_of(b); });

    const SearchSpace& space = objective.space();
    for (std::size_t member : order) {
        if (params.iters_per_config == 0) {
            break;
        }
        ModelConfig incumbent = front[member].config;
        double incumbent_perf = perf_of(member);
        std::vector<Individual> others;
        for (std::size_t j = 0; j < front.size(); ++j) {
            if (j != member) {
                others.push_back(front[j]);
            }
        }
        for (std::size_t round = 0; round < params.iters_per_config; ++round) {
            auto pool = candidate_pool(incumbent, others, space, objective.geometry(),
                                       budget_bytes, out.archive, params, rng);
            if (pool.empty()) {
                out.warnings.push_back("refine: member " + std::to_string(member) + " round " +
                                       std::to_string(round) + " has no feasible candidates");
                out.best_trace.push_back(feasible_best(out.archive, budget_bytes));
                out.evaluations_trace.push_back(objective.stats().evaluator_calls);
                continue;
            }
            if (pool.size() > params.pool_limit) {
                std::shuffle(pool.begin(), pool.end(), rng);
                pool.resize(params.pool_limit);
            }

            std::vector<Encoding> xs;
            std::vector<double> ys;
            for (const auto& ind : out.archive) {
                if (ind.ok()) {
                    xs.push_back(encode(ind.config, space));
                    ys.push_back(ind.result->performance);
                }
            }
            std::size_t choice = 0;
            double choice_ei = 0.0;
            if (!xs.empty()) {
                const GpModel gp = GpModel::fit(std::move(xs), std::move(ys), params.gp);
                const double y_best = feasible_best(out.archive, budget_bytes);
                choice_ei = -1.0;
                for (std::size_t i = 0; i < pool.size(); ++i) {
                    const Posterior post = gp.posterior(encode(pool[i], space));
                    const double ei = expected_improvement(post.mean, std::sqrt(post.variance), y_best);
                    if (ei > choice_ei) {
                        choice_ei = ei;
                        choice = i;
                    }
                }
            }

            const ModelConfig& cand = pool[choice];
            Individual ind{cand, objective.evaluate(cand)};
            RefineRound rec;
            rec.member = member;
            rec.round = round;
            rec.candidate = cand;
            rec.ei = choice_ei;
            rec.failed = !ind.ok();
            rec.performance = ind.result->performance;
            rec.memory_bytes = ind.result->memory_bytes;
            out.rounds.push_back(rec);
            if (ind.ok() && ind.result->performance > incumbent_perf) {
                incumbent = cand;
                incumbent_perf = ind.result->performance;
            }
            out.archive.push_back(std::move(ind));
            out.best_trace.push_back(feasible_best(out.archive, budget_bytes));
            out.evaluations_trace.push_back(objective.stats().evaluator_calls);
        }
    }

    if (const Individual* best = pick_best()) {
        out.best = *best;
    }
    return out;
}

} // namespace qradapt
