#include <doctest.h>

#include <random>

#include "imls/compaction.hpp"
#include "imls/errors.hpp"
#include "test_helpers.hpp"

using namespace imls;

namespace {

SamplingPattern random_pattern_grid(int m, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(p);
    SamplingPattern s;
    s.kind = PatternKind::Foveal;
    s.grid = BoolGrid(m);
    for (auto& c : s.grid.cells) c = coin(rng);
    if (s.grid.count() == 0) s.grid.cells[0] = 1;
    return s;
}

Image random_image(int h, int c, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> uni(0, 1);
    Image img(h, h, c);
    for (auto& x : img.data) x = uni(rng);
    return img;
}

}  // namespace

TEST_CASE("compaction map enumeration") {
    auto map = build_compaction_map(downsampling_pattern(4, 2), 2);
    CHECK(map.source == std::vector<std::uint32_t>{0, 2, 8, 10});
    CHECK(map.pad_start() == 4);

    auto big = build_compaction_map(downsampling_pattern(512, 4), 256);
    CHECK(big.pad_start() == 16384);
    CHECK(big.capacity() - big.pad_start() == 49152);
}

TEST_CASE("capacity overflow reports the required size") {
    SamplingPattern p;
    p.grid = BoolGrid(4);
    for (int k = 0; k < 5; ++k) p.grid.cells[k] = 1;
    try {
        build_compaction_map(p, 2);
        FAIL("expected CapacityError");
    } catch (const CapacityError& e) {
        CHECK(std::string(e.what()).find("n >= 3") != std::string::npos);
    }
}

TEST_CASE("impulse and constant images") {
    auto map = build_compaction_map(downsampling_pattern(8, 2), 4);
    Image pr(8, 8, 3, 0.0f);
    pr.at(0, 4, 0) = 1.0f;  // pattern pixel #2 in raster order
    auto c = compact(map, pr);
    for (std::size_t k = 0; k < c.data.size(); ++k) CHECK(c.data[k] == (k == 6 ? 1.0f : 0.0f));

    SamplingPattern p;
    p.grid = BoolGrid(8);
    for (int k = 0; k < 10; ++k) p.grid.cells[k * 3] = 1;
    auto m2 = build_compaction_map(p, 4);
    Image constant(8, 8, 1, 0.7f);
    auto cc = compact(m2, constant);
    for (std::size_t k = 0; k < 16; ++k) CHECK(cc.data[k] == (k < 10 ? 0.7f : 0.0f));

    Image ones(4, 4, 1, 1.0f);
    auto ind = decompact(m2, ones);
    for (std::size_t k = 0; k < 64; ++k) CHECK(ind.data[k] == (p.grid.cells[k] ? 1.0f : 0.0f));
}

TEST_CASE("coordinate list equals the explicit compaction matrix") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        auto pat = random_pattern_grid(8, 0.2, rng);
        for (int k = 63; pat.count() > 16; --k) pat.grid.cells[k] = 0;
        auto map = build_compaction_map(pat, 4);
        // Dense (m^2 x n^2) 0/1 matrix: entry (src, slot) = 1.
        std::vector<float> C(64 * 16, 0.0f);
        int slot = 0;
        for (int k = 0; k < 64; ++k)
            if (pat.grid.cells[k]) C[k * 16 + slot++] = 1.0f;
        Image x = random_image(8, 1, rng);
        std::vector<float> y(16, 0.0f);
        for (int s = 0; s < 16; ++s)
            for (int k = 0; k < 64; ++k) y[s] += x.data[k] * C[k * 16 + s];
        auto c = compact(map, x);
        for (int s = 0; s < 16; ++s) CHECK(c.data[s] == y[s]);
        // Transpose product is the decompaction.
        std::vector<float> back(64, 0.0f);
        for (int k = 0; k < 64; ++k)
            for (int s = 0; s < 16; ++s) back[k] += c.data[s] * C[k * 16 + s];
        auto d = decompact(map, c);
        for (int k = 0; k < 64; ++k) CHECK(d.data[k] == back[k]);
    }
}

TEST_CASE("round trips hold bit-exactly on random patterns") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 8 + 8 * (trial % 4);
        auto pat = random_pattern_grid(m, 0.05 + 0.005 * trial, rng);
        const int n = static_cast<int>(std::ceil(std::sqrt(double(pat.count())))) + trial % 3;
        auto map = build_compaction_map(pat, n);
        Image x = random_image(m, 3, rng);
        auto rt = decompact(map, compact(map, x));
        for (int k = 0; k < m * m; ++k)
            for (int c = 0; c < 3; ++c) CHECK(rt.data[k * 3 + c] == (pat.grid.cells[k] ? x.data[k * 3 + c] : 0.0f));
        Image ci = random_image(n, 3, rng);
        auto rc = compact(map, decompact(map, ci));
        for (std::size_t s = 0; s < map.capacity(); ++s)
            for (int c = 0; c < 3; ++c) CHECK(rc.data[s * 3 + c] == (s < map.pad_start() ? ci.data[s * 3 + c] : 0.0f));
        // Serial reference kernel agrees with the OpenMP kernel.
        CHECK(compact(map, x, Execution::Serial).data == compact(map, x, Execution::Parallel).data);
        CHECK(decompact(map, ci, Execution::Serial).data == decompact(map, ci, Execution::Parallel).data);
    }
}

TEST_CASE("compaction is linear") {
    std::mt19937_64 rng(3);
    auto pat = random_pattern_grid(16, 0.3, rng);
    auto map = build_compaction_map(pat, 9);
    Image x = random_image(16, 3, rng), y = random_image(16, 3, rng);
    const float a = 0.3f, b = -1.7f;
    Image z(16, 16, 3);
    for (std::size_t k = 0; k < z.data.size(); ++k) z.data[k] = a * x.data[k] + b * y.data[k];
    auto cz = compact(map, z), cx = compact(map, x), cy = compact(map, y);
    for (std::size_t k = 0; k < cz.data.size(); ++k) CHECK(std::abs(cz.data[k] - (a * cx.data[k] + b * cy.data[k])) <= 1e-12);
}

TEST_CASE("shape errors and mask helpers") {
    auto map = build_compaction_map(downsampling_pattern(8, 2), 4);
    CHECK_THROWS_AS(compact(map, Image(4, 4, 3)), ShapeError);
    CHECK_THROWS_AS(decompact(map, Image(8, 8, 3)), ShapeError);
    BoolGrid slots(4);
    slots.cells[1] = slots.cells[3] = 1;
    auto full = decompact_mask(map, slots);
    CHECK(full.count() == 2);
    CHECK(full.at(0, 2));
    CHECK(full.at(0, 6));
    CHECK(selected_sources(map, slots) == std::vector<std::uint32_t>{2, 6});
}

TEST_CASE("compaction map file round trip") {
    test::TempDir dir("map");
    auto map = build_compaction_map(downsampling_pattern(16, 4), 4);
    map.save(dir / "map.bin");
    CHECK(CompactionMap::load(dir / "map.bin") == map);
}
