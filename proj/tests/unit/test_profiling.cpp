// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "qradapt/error.hpp"
#include "qradapt/profiling.hpp"
#include "qradapt/synthetic.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace qradapt;

namespace {

// Every perturbation returns the baseline distribution.
class FlatEvaluator final : public Evaluator {
public:
    explicit FlatEvaluator(std::size_t layers) : layers_(layers) {}
    EvaluatorMeta meta() const override {
        return {layers_, 4, ModelGeometry::uniform(layers_, transformer_layer_geometry(8, 16))};
    }
    double evaluate(const ModelConfig&, int) override { return 0.5; }
    std::vector<double> distribution(std::size_t, std::optional<std::size_t>,
                                     std::optional<int>) override {
        return {0.25, 0.25, 0.5};
    }
    std::size_t max_concurrency() const override { return 1; }

private:
    std::size_t layers_;
};

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> v(n);
    double s = 0;
    for (auto& x : v) {
        x = e(rng);
        s += x;
    }
    for (auto& x : v) {
        x /= s;
    }
    return v;
}

} // namespace

TEST_SUITE("profiling") {

TEST_CASE("kl divergence examples") {
    const std::vector<double> half{0.5, 0.5};
    CHECK(kl_divergence(half, half) == doctest::Approx(0.0));
    CHECK(kl_divergence(std::vector<double>{1.0, 0.0}, half) == doctest::Approx(std::log(2.0)));
    CHECK(kl_divergence(std::vector<double>{0.75, 0.25}, std::vector<double>{0.25, 0.75}) ==
          doctest::Approx(0.5 * std::log(3.0)));
}

TEST_CASE("kl divergence against zero mass in q is infinite") {
    const double kl = kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0});
    CHECK(std::isinf(kl));
    CHECK(kl > 0);
}

TEST_CASE("kl divergence errors") {
    CHECK_THROWS_AS(kl_divergence(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}),
                    StructuralError);
    CHECK_THROWS_AS(kl_divergence(std::vector<double>{1.5, -0.5}, std::vector<double>{0.5, 0.5}),
                    StructuralError);
    CHECK_THROWS_AS(kl_divergence(std::vector<double>{0.7, 0.7}, std::vector<double>{0.5, 0.5}),
                    StructuralError);
}

TEST_CASE("kl divergence is zero on identical inputs and non-negative otherwise") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 500; ++i) {
        const auto p = random_simplex(rng, 2 + i % 7);
        const auto q = random_simplex(rng, p.size());
        CHECK(kl_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(kl_divergence(p, q) >= 0.0);
        // Direct formula, all entries strictly positive here.
        double direct = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            direct += p[k] * std::log(p[k] / q[k]);
        }
        CHECK(kl_divergence(p, q) == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("profile normalization") {
    const auto prof = SensitivityProfile::from_scores({3.0, 1.0});
    CHECK(prof.normalized[0] == doctest::Approx(0.75));
    CHECK(prof.normalized[1] == doctest::Approx(0.25));
    CHECK_FALSE(prof.degenerate);

    const auto zero = SensitivityProfile::from_scores({0.0, 0.0, 0.0, 0.0});
    CHECK(zero.degenerate);
    for (double p : zero.normalized) {
        CHECK(p == doctest::Approx(0.25));
    }
    CHECK(SensitivityProfile::from_scores({2.5}).normalized == std::vector<double>{1.0});
    CHECK_THROWS(SensitivityProfile::from_scores({}));
    CHECK_THROWS(SensitivityProfile::from_scores({1.0, -1.0}));
}

TEST_CASE("identical distributions give a degenerate uniform profile") {
    FlatEvaluator flat(5);
    const auto prof = sensitivity_profile(flat, SearchSpace{}, 4);
    CHECK(prof.degenerate);
    for (std::size_t l = 0; l < 5; ++l) {
        CHECK(prof.scores[l] == doctest::Approx(0.0));
        CHECK(prof.normalized[l] == doctest::Approx(0.2));
    }
}

TEST_CASE("synthetic profile: more demand, more sensitivity") {
    SyntheticModel model;
    model.task_demand = {0.0, 1.0};
    SyntheticEvaluator ev(model, ModelGeometry::uniform(2, transformer_layer_geometry(16, 32)));
    const auto prof = sensitivity_profile(ev, SearchSpace{}, model.calib_size);
    CHECK(prof.scores[0] == doctest::Approx(0.0));
    CHECK(prof.scores[1] > prof.scores[0]);

    auto ramp = SyntheticEvaluator::make_default(8, 5);
    const auto ramp_prof = sensitivity_profile(ramp, SearchSpace{}, 16);
    for (std::size_t l = 1; l < 8; ++l) {
        CHECK(ramp_prof.scores[l] > ramp_prof.scores[l - 1]);
    }
}

TEST_CASE("seed configuration hand traces") {
    const SearchSpace space;
    const auto eq = seed_configuration(SensitivityProfile::from_scores({1.0, 1.0}), space);
    CHECK(eq == ModelConfig{{{4, 8}, {4, 8}}});

    const auto one = seed_configuration(SensitivityProfile::from_scores({0.3}), space);
    CHECK(one == ModelConfig{{{8, 16}}});

    const auto skew = seed_configuration(SensitivityProfile::from_scores({3.0, 1.0}), space);
    CHECK(skew == ModelConfig{{{4, 12}, {2, 4}}});
}

TEST_CASE("seed configuration against a direct floor-index oracle") {
    const SearchSpace space = SearchSpace::make({1, 2, 3, 4, 6, 8}, {1, 2, 4, 8, 16, 32, 64});
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> scores(1 + trial % 6);
        for (auto& s : scores) {
            s = u(rng);
        }
        const auto prof = SensitivityProfile::from_scores(scores);
        const auto seed = seed_configuration(prof, space);
        double total = 0;
        for (double s : scores) {
            total += s;
        }
        for (std::size_t l = 0; l < scores.size(); ++l) {
            const double p = scores[l] / total;
            const auto ib = std::min<std::size_t>(std::size_t(std::floor(p * 5)), 5);
            const auto ir = std::min<std::size_t>(std::size_t(std::floor(p * 6)), 6);
            CHECK(seed[l].bit == space.bits()[ib]);
            CHECK(seed[l].rank == space.ranks()[ir]);
        }
        // Scale invariance.
        std::vector<double> scaled = scores;
        for (auto& s : scaled) {
            s *= 37.5;
        }
        CHECK(seed_configuration(SensitivityProfile::from_scores(scaled), space) == seed);
        // Monotone in p.
        for (std::size_t a = 0; a < scores.size(); ++a) {
            for (std::size_t b = 0; b < scores.size(); ++b) {
                if (prof.normalized[a] >= prof.normalized[b]) {
                    CHECK(seed[a].bit >= seed[b].bit);
                    CHECK(seed[a].rank >= seed[b].rank);
                }
            }
        }
    }
}

TEST_CASE("median configuration") {
    CHECK(median_configuration(3, SearchSpace{}) == ModelConfig::uniform(3, 4, 8));
}

TEST_CASE("budget repair steps down the least sensitive layer, bit before rank") {
    const SearchSpace space;
    LayerGeometry lg;
    lg.frozen_params = 80;
    lg.adapter_in_dims = {1};
    lg.adapter_out_dims = {1};
    const auto geom = ModelGeometry::uniform(2, lg);
    // (8,16) costs 80 + 64 = 144, (4,16) costs 40 + 64 = 104, (2,16) 20 + 64 = 84.
    ModelConfig c{{{8, 16}, {8, 16}}};
    const std::vector<double> priority{0.9, 0.1};
    REQUIRE(repair_to_budget(c, priority, space, geom, 248));
    CHECK(c == ModelConfig{{{8, 16}, {4, 16}}});

    ModelConfig d{{{8, 16}, {8, 16}}};
    REQUIRE(repair_to_budget(d, priority, space, geom, 224));
    CHECK(d == ModelConfig{{{8, 16}, {2, 14}}});
    CHECK(memory_footprint(d, geom) <= 224);

    ModelConfig untouched{{{4, 4}, {4, 4}}};
    REQUIRE(repair_to_budget(untouched, priority, space, geom, 10'000));
    CHECK(untouched == ModelConfig{{{4, 4}, {4, 4}}});

    ModelConfig impossible{{{8, 16}, {8, 16}}};
    CHECK_FALSE(repair_to_budget(impossible, priority, space, geom, 10));
}

TEST_CASE("budget repair ties go to the lower layer index") {
    const SearchSpace space;
    LayerGeometry lg;
    lg.frozen_params = 80;
    const auto geom = ModelGeometry::uniform(2, lg);
    ModelConfig c{{{8, 2}, {8, 2}}};
    REQUIRE(repair_to_budget(c, std::vector<double>{0.5, 0.5}, space, geom, 150));
    CHECK(c == ModelConfig{{{4, 2}, {8, 2}}});
}

} // TEST_SUITE
