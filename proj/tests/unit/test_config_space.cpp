// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include "qradapt/config_space.hpp"
#include "qradapt/error.hpp"

#include <random>

using namespace qradapt;

namespace {

LayerGeometry layer(std::int64_t frozen, std::vector<std::int64_t> in, std::vector<std::int64_t> out) {
    LayerGeometry g;
    g.frozen_params = frozen;
    g.adapter_in_dims = std::move(in);
    g.adapter_out_dims = std::move(out);
    return g;
}

EvalResult point(double perf, std::uint64_t mem) {
    EvalResult r;
    r.performance = perf;
    r.memory_bytes = mem;
    return r;
}

} // namespace

TEST_SUITE("config_space") {

TEST_CASE("default search space") {
    const SearchSpace space;
    CHECK(space.bits() == std::vector<int>{2, 4, 8});
    CHECK(space.ranks() == std::vector<int>{2, 4, 6, 8, 10, 12, 14, 16});
    CHECK(space.median_bit() == 4);
    CHECK(space.median_rank() == 8);
    CHECK(space.bit_index(8) == 2);
    CHECK(space.rank_index(10) == 4);
    CHECK(space.contains({4, 6}));
    CHECK_FALSE(space.contains({3, 6}));
    CHECK_FALSE(space.contains({4, 7}));
}

TEST_CASE("search space rejects unsorted, duplicate, empty and non-positive sets") {
    CHECK_THROWS_AS(SearchSpace::make({4, 2}, {2}), StructuralError);
    CHECK_THROWS_AS(SearchSpace::make({2, 2}, {2}), StructuralError);
    CHECK_THROWS_AS(SearchSpace::make({}, {2}), StructuralError);
    CHECK_THROWS_AS(SearchSpace::make({0, 2}, {2}), StructuralError);
    CHECK_THROWS_AS(SearchSpace::make({2}, {-1, 2}), StructuralError);
    CHECK_NOTHROW(SearchSpace::make({3}, {5}));
}

TEST_CASE("validate config against the space") {
    const SearchSpace space;
    CHECK_NOTHROW(space.validate(ModelConfig::uniform(3, 4, 8)));
    CHECK_THROWS(space.validate(ModelConfig::uniform(3, 5, 8)));
    CHECK_THROWS(space.validate(ModelConfig{}));
}

TEST_CASE("memory footprint examples") {
    ModelGeometry only_adapter;
    only_adapter.layers = {layer(0, {4}, {4})};
    CHECK(memory_footprint(ModelConfig{{{4, 2}}}, only_adapter) == 32);

    ModelGeometry only_frozen;
    only_frozen.layers = {layer(1024, {}, {})};
    CHECK(memory_footprint(ModelConfig{{{4, 2}}}, only_frozen) == 512);

    ModelGeometry two;
    two.layers = {layer(100, {8}, {8}), layer(100, {8}, {8})};
    const ModelConfig c{{{2, 4}, {8, 4}}};
    CHECK(layer_memory(c[0], two.layers[0], 2) == 153);
    CHECK(layer_memory(c[1], two.layers[1], 2) == 228);
    CHECK(memory_footprint(c, two) == 381);
}

TEST_CASE("frozen bytes round up per layer") {
    ModelGeometry g;
    g.layers = {layer(5, {}, {}), layer(5, {}, {})};
    // 10 bits per layer -> 2 bytes each; a global ceiling would give ceil(20/8) = 3.
    CHECK(memory_footprint(ModelConfig{{{2, 2}, {2, 2}}}, g) == 4);
}

TEST_CASE("overhead and adapter width are priced") {
    ModelGeometry g;
    g.layers = {layer(8, {2}, {3})};
    g.layers[0].overhead_bytes = 7;
    g.adapter_bytes_per_param = 4;
    // 8*4/8 = 4 frozen bytes, 4 * 2 * (2+3) = 40 adapter bytes, 7 overhead.
    CHECK(memory_footprint(ModelConfig{{{4, 2}}}, g) == 51);
}

TEST_CASE("memory footprint length mismatch") {
    ModelGeometry g;
    g.layers = {layer(8, {}, {})};
    CHECK_THROWS_AS(memory_footprint(ModelConfig::uniform(2, 4, 2), g), StructuralError);
}

TEST_CASE("geometry validation") {
    CHECK_THROWS(layer(-1, {}, {}).validate());
    CHECK_THROWS(layer(1, {2}, {}).validate());
    CHECK_THROWS(layer(1, {0}, {2}).validate());
    CHECK(layer(1, {2, 3}, {4, 5}).adapter_params_per_rank() == 14);
}

TEST_CASE("average bit examples") {
    const auto g = ModelGeometry::uniform(3, layer(64, {}, {}));
    CHECK(average_bit(ModelConfig::uniform(3, 4, 2), g) == doctest::Approx(4.0));

    const auto pair = ModelGeometry::uniform(2, layer(64, {}, {}));
    CHECK(average_bit(ModelConfig{{{2, 2}, {8, 2}}}, pair) == doctest::Approx(5.0));

    ModelGeometry uneven;
    uneven.layers = {layer(100, {}, {}), layer(300, {}, {})};
    CHECK(average_bit(ModelConfig{{{8, 2}, {2, 2}}}, uneven) == doctest::Approx(3.5));
    CHECK(average_rank(ModelConfig{{{8, 4}, {2, 8}}}, uneven) == doctest::Approx(7.0));
    CHECK(mean_rank(ModelConfig{{{8, 4}, {2, 8}}}) == doctest::Approx(6.0));
}

TEST_CASE("average bit needs frozen parameters") {
    const auto g = ModelGeometry::uniform(2, layer(0, {4}, {4}));
    CHECK_THROWS_AS(average_bit(ModelConfig::uniform(2, 4, 2), g), StructuralError);
}

TEST_CASE("dominance examples") {
    CHECK(dominates(point(1.0, 10), point(0.5, 20)));
    CHECK_FALSE(dominates(point(1.0, 10), point(1.0, 10)));
    CHECK_FALSE(dominates(point(1.0, 20), point(0.5, 10)));
    CHECK_FALSE(dominates(point(0.5, 10), point(1.0, 20)));
    CHECK(dominates(point(1.0, 10), point(1.0, 11)));
}

TEST_CASE("dominance is irreflexive, antisymmetric and transitive") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> perf(0, 5);
    std::uniform_int_distribution<std::uint64_t> mem(0, 5);
    std::vector<EvalResult> pts;
    for (int i = 0; i < 60; ++i) {
        pts.push_back(point(perf(rng), mem(rng)));
    }
    for (const auto& a : pts) {
        CHECK_FALSE(dominates(a, a));
        for (const auto& b : pts) {
            CHECK_FALSE((dominates(a, b) && dominates(b, a)));
            for (const auto& c : pts) {
                if (dominates(a, b) && dominates(b, c)) {
                    CHECK(dominates(a, c));
                }
            }
        }
    }
}

TEST_CASE("memory footprint is monotone in every bit and rank") {
    const SearchSpace space;
    ModelGeometry g;
    g.layers = {layer(1000, {16}, {32}), layer(333, {8, 8}, {8, 8}), layer(77, {5}, {9})};
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        ModelConfig c;
        for (std::size_t l = 0; l < g.size(); ++l) {
            c.layers.push_back({space.bits()[rng() % space.bits().size()],
                                space.ranks()[rng() % space.ranks().size()]});
        }
        const auto base = memory_footprint(c, g);
        for (std::size_t l = 0; l < c.size(); ++l) {
            const auto bi = space.bit_index(c[l].bit);
            if (bi + 1 < space.bits().size()) {
                ModelConfig up = c;
                up[l].bit = space.bits()[bi + 1];
                CHECK(memory_footprint(up, g) >= base);
            }
            const auto ri = space.rank_index(c[l].rank);
            if (ri + 1 < space.ranks().size()) {
                ModelConfig up = c;
                up[l].rank = space.ranks()[ri + 1];
                CHECK(memory_footprint(up, g) >= base);
            }
        }
        const double avg = average_bit(c, g);
        CHECK(avg >= space.min_bit());
        CHECK(avg <= space.max_bit());
    }
}

} // TEST_SUITE
