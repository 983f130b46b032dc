// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "qradapt/error.hpp"
#include "qradapt/profiling.hpp"
#include "qradapt/synthetic.hpp"

#include <cmath>
#include <map>
#include <random>

using namespace qradapt;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double score_oracle(int bit, int rank, double t) {
    const double e = std::pow(2.0, -(bit - 1));
    return logistic(4.0 * ((rank / 16.0 + 1.0 - e) - (e + t)));
}

double evaluate_oracle(const std::vector<double>& t, const ModelConfig& c, int steps) {
    double wsum = 0;
    double base = 0;
    for (std::size_t l = 0; l < t.size(); ++l) {
        wsum += 1.0 + t[l];
        base += (1.0 + t[l]) * score_oracle(c[l].bit, c[l].rank, t[l]);
    }
    base /= wsum;
    const double atten = (1 - std::exp(-steps / 3.0)) / (1 - std::exp(-10.0 / 3.0));
    return base * std::min(1.0, atten);
}

ModelConfig random_config(std::mt19937_64& rng, std::size_t layers, const SearchSpace& space) {
    ModelConfig c;
    for (std::size_t l = 0; l < layers; ++l) {
        c.layers.push_back({space.bits()[rng() % space.bits().size()],
                            space.ranks()[rng() % space.ranks().size()]});
    }
    return c;
}

} // namespace

TEST_SUITE("synthetic") {

TEST_CASE("quantization noise") {
    CHECK(quant_noise(2) == 0.5);
    CHECK(quant_noise(8) == doctest::Approx(0.0078125));
    CHECK(quant_noise(2) > quant_noise(4));
    CHECK(quant_noise(4) > quant_noise(8));
    CHECK_THROWS(quant_noise(0));
}

TEST_CASE("layer score") {
    // supply = 8/16 + 0.5 = 1.0, demand = 0.5 + 0.5 = 1.0.
    CHECK(layer_score({2, 8}, 0.5, 1.0, 1.0, 16) == doctest::Approx(0.5));
    CHECK(layer_score({8, 16}, 0.0, 1.0, 1.0, 16) > 0.9);
    for (int bit : {2, 4, 8}) {
        for (int rank = 2; rank <= 16; rank += 2) {
            for (double t : {0.0, 0.3, 1.0}) {
                CHECK(layer_score({bit, rank}, t, 1.0, 1.0, 16) ==
                      doctest::Approx(score_oracle(bit, rank, t)).epsilon(1e-12));
            }
        }
    }
    const SearchSpace space;
    for (double t : {0.0, 0.5, 1.0}) {
        for (int rank : space.ranks()) {
            CHECK(layer_score({4, rank}, t, 1, 1, 16) >= layer_score({2, rank}, t, 1, 1, 16));
            CHECK(layer_score({8, rank}, t, 1, 1, 16) >= layer_score({4, rank}, t, 1, 1, 16));
        }
        for (std::size_t r = 1; r < space.ranks().size(); ++r) {
            CHECK(layer_score({4, space.ranks()[r]}, t, 1, 1, 16) >=
                  layer_score({4, space.ranks()[r - 1]}, t, 1, 1, 16));
        }
    }
}

TEST_CASE("synthetic evaluate matches the closed form") {
    const SearchSpace space;
    auto model = SyntheticModel::ramp(6);
    std::mt19937_64 rng(12);
    for (int i = 0; i < 50; ++i) {
        const auto c = random_config(rng, 6, space);
        for (int steps : {0, 1, 3, 10, 25}) {
            CHECK(synthetic_evaluate(model, c, steps) ==
                  doctest::Approx(evaluate_oracle(model.task_demand, c, steps)).epsilon(1e-12));
        }
    }
    CHECK(synthetic_evaluate(model, ModelConfig::uniform(6, 4, 8), 0) == 0.0);
    CHECK_THROWS_AS(synthetic_evaluate(model, ModelConfig::uniform(5, 4, 8), 10), StructuralError);
}

TEST_CASE("max config gives the upper envelope") {
    const SearchSpace space;
    auto model = SyntheticModel::ramp(4);
    const double top = synthetic_evaluate(model, ModelConfig::uniform(4, 8, 16), kProxyStepsFull);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 200; ++i) {
        CHECK(synthetic_evaluate(model, random_config(rng, 4, space), kProxyStepsFull) <= top);
    }
}

TEST_CASE("monotone in every bit and rank without noise") {
    const SearchSpace space;
    auto model = SyntheticModel::ramp(5);
    std::mt19937_64 rng(21);
    for (int i = 0; i < 200; ++i) {
        const auto c = random_config(rng, 5, space);
        const double base = synthetic_evaluate(model, c, 10);
        for (std::size_t l = 0; l < 5; ++l) {
            const auto bi = space.bit_index(c[l].bit);
            if (bi + 1 < space.bits().size()) {
                auto up = c;
                up[l].bit = space.bits()[bi + 1];
                CHECK(synthetic_evaluate(model, up, 10) >= base);
            }
            const auto ri = space.rank_index(c[l].rank);
            if (ri + 1 < space.ranks().size()) {
                auto up = c;
                up[l].rank = space.ranks()[ri + 1];
                CHECK(synthetic_evaluate(model, up, 10) >= base);
            }
        }
    }
}

TEST_CASE("pseudo-noise is deterministic and bounded") {
    const SearchSpace space;
    auto model = SyntheticModel::ramp(4);
    auto noisy = model;
    noisy.noise_scale = 0.02;
    noisy.seed = 9;
    std::mt19937_64 rng(5);
    bool moved = false;
    for (int i = 0; i < 100; ++i) {
        const auto c = random_config(rng, 4, space);
        const double clean = synthetic_evaluate(model, c, 10);
        const double a = synthetic_evaluate(noisy, c, 10);
        CHECK(a == synthetic_evaluate(noisy, c, 10));
        CHECK(std::abs(a - clean) <= 0.02 + 1e-15);
        moved = moved || a != clean;
    }
    CHECK(moved);
    auto other_seed = noisy;
    other_seed.seed = 10;
    CHECK(synthetic_evaluate(other_seed, ModelConfig::uniform(4, 4, 8), 10) !=
          synthetic_evaluate(noisy, ModelConfig::uniform(4, 4, 8), 10));
}

TEST_CASE("model validation") {
    auto model = SyntheticModel::ramp(3);
    CHECK(model.task_demand == std::vector<double>{0.0, 0.5, 1.0});
    model.task_demand[1] = 1.5;
    CHECK_THROWS(model.validate());
    model = SyntheticModel::ramp(3);
    model.alpha = 0;
    CHECK_THROWS(model.validate());
    CHECK_THROWS(SyntheticModel{}.validate());
}

TEST_CASE("distributions") {
    SyntheticModel model;
    model.task_demand = {0.0, 0.2, 0.9};
    const auto base = synthetic_distribution(model, 3, std::nullopt, std::nullopt);
    CHECK(base.size() == model.dist_dim);
    double s = 0;
    for (double p : base) {
        CHECK(p > 0);
        s += p;
    }
    CHECK(s == doctest::Approx(1.0));
    CHECK(kl_divergence(base, base) == 0.0);
    CHECK(base == synthetic_distribution(model, 3, std::nullopt, std::nullopt));
    CHECK(base != synthetic_distribution(model, 4, std::nullopt, std::nullopt));
    CHECK(synthetic_distribution(model, 3, 0, 2) == base);
    CHECK_THROWS(synthetic_distribution(model, model.calib_size, std::nullopt, std::nullopt));
    CHECK_THROWS(synthetic_distribution(model, 0, 3, 2));
    CHECK_THROWS(synthetic_distribution(model, 0, 1, std::nullopt));

    double kl1 = 0;
    double kl2 = 0;
    for (std::size_t i = 0; i < model.calib_size; ++i) {
        const auto b = synthetic_distribution(model, i, std::nullopt, std::nullopt);
        kl1 += kl_divergence(b, synthetic_distribution(model, i, 1, 2));
        kl2 += kl_divergence(b, synthetic_distribution(model, i, 2, 2));
        // Higher bit-width, smaller displacement.
        CHECK(kl_divergence(b, synthetic_distribution(model, i, 2, 8)) <
              kl_divergence(b, synthetic_distribution(model, i, 2, 2)));
    }
    CHECK(kl2 > kl1);
    CHECK(kl1 > 0);
}

TEST_CASE("default transformer geometry") {
    const auto g = transformer_layer_geometry(256, 1024);
    CHECK(g.frozen_params == 4 * 256 * 256 + 2 * 256 * 1024);
    CHECK(g.adapter_in_dims.size() == 6);
    CHECK(g.adapter_params_per_rank() == 4 * 512 + 2 * 1280);
}

TEST_CASE("pilot study ordering") {
    for (std::size_t layers : {4u, 6u, 8u, 16u, 28u, 32u}) {
        CAPTURE(layers);
        auto model = SyntheticModel::ramp(layers);
        std::map<std::string, double> perf;
        for (const auto& pc : pilot_configs(layers)) {
            perf[pc.name] = synthetic_evaluate(model, pc.config, kProxyStepsFull);
        }
        CHECK(perf["B"] > perf["D"] + 0.01);
        CHECK(perf["D"] > perf["C"] + 0.01);
        CHECK(perf["C"] > perf["A"] + 0.01);
    }
    const auto pcs = pilot_configs(4);
    REQUIRE(pcs.size() == 4);
    CHECK(pcs[0].config == ModelConfig::uniform(4, 2, 8));
    CHECK(pcs[1].config == ModelConfig::uniform(4, 4, 8));
    CHECK(pcs[2].config == ModelConfig{{{4, 8}, {4, 8}, {2, 16}, {2, 16}}});
    CHECK(pcs[3].config == ModelConfig{{{2, 16}, {2, 16}, {4, 8}, {4, 8}}});
    CHECK_THROWS(pilot_configs(3));
}

TEST_CASE("synthetic evaluator") {
    auto ev = SyntheticEvaluator::make_default(4, 0);
    const auto meta = ev.meta();
    CHECK(meta.layers == 4);
    CHECK(meta.calib_size == 16);
    CHECK(meta.geometry.size() == 4);
    CHECK(ev.evaluate(ModelConfig::uniform(4, 4, 8), 10) ==
          synthetic_evaluate(ev.model(), ModelConfig::uniform(4, 4, 8), 10));
    CHECK(ev.max_concurrency() >= 1);
}

} // TEST_SUITE
