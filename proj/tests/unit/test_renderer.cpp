#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "imls/errors.hpp"
#include "imls/renderer.hpp"
#include "test_helpers.hpp"

using namespace imls;

namespace {

RenderConfig small_config(int m) {
    RenderConfig cfg;
    cfg.resolution = m;
    return cfg;
}

const Volume& spheres() {
    static const Volume v = generate_synthetic_volume(SyntheticKind::Spheres, {48, 48, 48}, 42);
    return v;
}

BoolGrid random_mask(int m, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(p);
    BoolGrid g(m);
    for (auto& c : g.cells) c = coin(rng) ? 1 : 0;
    return g;
}

}  // namespace

TEST_CASE("center pixel looks at lookAt") {
    RenderConfig cfg = small_config(9);
    ViewParams view{{0, 0, 3}, {0, 0, 0}, {0, 1, 0}};
    Ray r = build_ray(view, cfg, 4, 4);
    CHECK(std::abs(r.direction.x) < 1e-9);
    CHECK(std::abs(r.direction.y) < 1e-9);
    CHECK(std::abs(r.direction.z + 1.0) < 1e-9);
    CHECK(length(r.direction) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mirrored columns mirror directions in camera x") {
    RenderConfig cfg = small_config(16);
    ViewParams view{{0, 0, 3}, {0, 0, 0}, {0, 1, 0}};
    for (int i = 0; i < 16; i += 5)
        for (int j = 0; j < 8; ++j) {
            auto a = build_ray(view, cfg, i, j).direction;
            auto b = build_ray(view, cfg, i, 15 - j).direction;
            CHECK(a.x == doctest::Approx(-b.x));
            CHECK(a.y == doctest::Approx(b.y));
            CHECK(a.z == doctest::Approx(b.z));
        }
}

TEST_CASE("corner pixel follows the pinhole formula") {
    RenderConfig cfg = small_config(8);
    cfg.fov_y_degrees = 45.0;
    ViewParams view{{0, 0, 3}, {0, 0, 0}, {0, 1, 0}};
    // Top-left pixel center sits at (-7/8, +7/8) of the half extent tan(22.5 deg).
    const double t = std::tan(3.14159265358979323846 / 8.0);
    const double x = -0.875 * t, y = 0.875 * t;
    const double len = std::sqrt(x * x + y * y + 1.0);
    auto d = build_ray(view, cfg, 0, 0).direction;
    CHECK(d.x == doctest::Approx(x / len).epsilon(1e-12));
    CHECK(d.y == doctest::Approx(y / len).epsilon(1e-12));
    CHECK(d.z == doctest::Approx(-1.0 / len).epsilon(1e-12));
}

TEST_CASE("degenerate views are rejected") {
    RenderConfig cfg = small_config(8);
    CHECK_THROWS_AS(build_ray({{0, 0, 0}, {0, 0, 0}, {0, 1, 0}}, cfg, 0, 0), ViewError);
    CHECK_THROWS_AS(build_ray({{0, 3, 0}, {0, 0, 0}, {0, 1, 0}}, cfg, 0, 0), ViewError);
    CHECK_THROWS_AS(build_ray({{0, 0, 3}, {0, 0, 0}, {0, 1, 0}}, cfg, 8, 0), ParameterError);
}

TEST_CASE("missing rays return the background") {
    RenderConfig cfg = small_config(8);
    cfg.background = {0.1, 0.2, 0.3, 1.0};
    Ray r{{0, 0, 5}, {0, 1, 0}};
    auto res = cast_ray(spheres(), TransferFunction::default_ramp(), cfg, r);
    CHECK(res.rgb[0] == doctest::Approx(0.1));
    CHECK(res.rgb[1] == doctest::Approx(0.2));
    CHECK(res.rgb[2] == doctest::Approx(0.3));
    CHECK(res.elapsed_seconds >= 0.0);
}

TEST_CASE("front-to-back compositing of two half-transparent samples") {
    const Rgb c1{0.8, 0.4, 0.2}, c2{0.1, 0.6, 1.0};
    const Rgba bg{0.5, 0.5, 0.5, 1.0};
    Compositor acc;
    acc.add(c1, 0.5);
    acc.add(c2, 0.5);
    auto out = acc.resolve(bg);
    for (int c = 0; c < 3; ++c) CHECK(out[c] == doctest::Approx(c1[c] * 0.5 + c2[c] * 0.25 + bg[c] * 0.25));
    CHECK(acc.alpha == doctest::Approx(0.75));
}

TEST_CASE("opaque first sample saturates after one step") {
    // Constant field: zero gradient, so the sample is unshaded.
    Volume v({4, 4, 4}, {2.0 / 3, 2.0 / 3, 2.0 / 3}, std::vector<float>(64, 1.0f));
    TransferFunction opaque({{0.0, {0.3, 0.6, 0.9, 1.0}}, {1.0, {0.3, 0.6, 0.9, 1.0}}});
    RenderConfig cfg = small_config(8);
    auto rgb = march_ray(v, opaque, cfg, {{0, 0, 3}, {0, 0, -1}});
    CHECK(rgb[0] == doctest::Approx(0.3));
    CHECK(rgb[1] == doctest::Approx(0.6));
    CHECK(rgb[2] == doctest::Approx(0.9));
    Compositor acc;
    acc.add({0.3, 0.6, 0.9}, 1.0);
    CHECK(acc.alpha >= cfg.termination_opacity);
}

TEST_CASE("headlight shading") {
    Lighting l;
    // Normal facing the viewer: ambient + diffuse + full specular.
    auto s = shade({0.5, 0.5, 0.5, 1.0}, {0, 0, 2}, {0, 0, 1}, l);
    CHECK(s[0] == doctest::Approx(0.5 * (0.2 + 0.7) + 0.1));
    // Grazing normal: ambient only.
    auto g = shade({0.5, 0.5, 0.5, 1.0}, {1, 0, 0}, {0, 0, 1}, l);
    CHECK(g[0] == doctest::Approx(0.5 * 0.2));
}

TEST_CASE("empty mask renders background at zero cost") {
    RenderConfig cfg = small_config(16);
    BoolGrid none(16, false);
    auto img = render_image(spheres(), TransferFunction::default_ramp(), cfg, {}, &none);
    CHECK(img.selective_render_seconds() == 0.0);
    for (float x : img.rgb.data) CHECK(x == 0.0f);
    BoolGrid wrong(8);
    CHECK_THROWS_AS(render_image(spheres(), TransferFunction::default_ramp(), cfg, {}, &wrong), ParameterError);
}

TEST_CASE("masked renders match the full render bit-exactly") {
    RenderConfig cfg = small_config(32);
    ViewParams view{{1.5, 1.0, 2.2}, {0, 0, 0}, {0, 1, 0}};
    const auto tf = TransferFunction::default_ramp();
    auto full = render_image(spheres(), tf, cfg, view);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 10; ++t) {
        auto mask = random_mask(32, t == 0 ? 0.5 : 0.1 + 0.08 * t, rng);
        auto part = render_image(spheres(), tf, cfg, view, &mask);
        for (std::size_t k = 0; k < mask.cells.size(); ++k) {
            if (mask.cells[k]) {
                for (int c = 0; c < 3; ++c) CHECK(part.rgb.data[k * 3 + c] == full.rgb.data[k * 3 + c]);
                CHECK(part.pixel_time[k] > 0.0);
            } else {
                CHECK(part.pixel_time[k] == 0.0);
                CHECK(part.rgb.data[k * 3] == 0.0f);
            }
        }
    }
    auto par = render_image_parallel(spheres(), tf, cfg, view);
    CHECK(par.rgb.data == full.rgb.data);
    CHECK_FALSE(par.timed);
}

TEST_CASE("render_pixels agrees with render_image") {
    RenderConfig cfg = small_config(16);
    ViewParams view{{0, 1, 2.8}, {0, 0, 0}, {0, 1, 0}};
    const auto tf = TransferFunction::default_ramp();
    auto full = render_image(spheres(), tf, cfg, view);
    std::vector<std::uint32_t> idx{0, 17, 100, 255};
    auto timed = render_pixels(spheres(), tf, cfg, view, idx, true);
    auto fast = render_pixels(spheres(), tf, cfg, view, idx, false);
    for (std::size_t k = 0; k < idx.size(); ++k)
        for (int c = 0; c < 3; ++c) {
            CHECK(static_cast<float>(timed.rgb[k][c]) == full.rgb.data[idx[k] * 3 + c]);
            CHECK(fast.rgb[k][c] == timed.rgb[k][c]);
        }
    CHECK(timed.seconds.size() == idx.size());
    CHECK(fast.seconds.empty());
}

TEST_CASE("per-pixel times add up to the outer wall clock") {
    RenderConfig cfg = small_config(64);
    ViewParams view{{0.4, 0.3, 2.6}, {0, 0, 0}, {0, 1, 0}};
    const auto tf = TransferFunction::default_ramp();
    (void)render_image(spheres(), tf, cfg, view);  // warm caches
    double best_rel = 1.0;
    for (int attempt = 0; attempt < 3; ++attempt) {
        const auto t0 = std::chrono::steady_clock::now();
        auto img = render_image(spheres(), tf, cfg, view);
        const double outer = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        best_rel = std::min(best_rel, std::abs(outer - img.selective_render_seconds()) / outer);
    }
    CHECK(best_rel < 0.05);
}

TEST_CASE("selective render cost grows with mask size") {
    RenderConfig cfg = small_config(48);
    ViewParams view{{0.4, 0.3, 2.6}, {0, 0, 0}, {0, 1, 0}};
    const auto tf = TransferFunction::default_ramp();
    std::vector<std::size_t> order(48 * 48);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(9);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> cost;
    for (int step = 1; step <= 20; ++step) {
        BoolGrid mask(48);
        const std::size_t n = order.size() * step / 20;
        for (std::size_t k = 0; k < n; ++k) mask.cells[order[k]] = 1;
        cost.push_back(render_image(spheres(), tf, cfg, view, &mask).selective_render_seconds());
    }
    // Spearman rank correlation between mask size and cost.
    std::vector<int> rank(20);
    std::vector<int> idx(20);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return cost[a] < cost[b]; });
    for (int r = 0; r < 20; ++r) rank[idx[r]] = r;
    double d2 = 0;
    for (int k = 0; k < 20; ++k) d2 += double(rank[k] - k) * (rank[k] - k);
    const double rho = 1.0 - 6.0 * d2 / (20.0 * (400.0 - 1.0));
    CHECK(rho > 0.9);
    CHECK(cost.back() > 5.0 * cost.front());
}

TEST_CASE("pixel time dump round trip") {
    test::TempDir dir("times");
    RenderConfig cfg = small_config(8);
    auto img = render_image(spheres(), TransferFunction::default_ramp(), cfg, {});
    write_pixel_times(img, dir / "t.bin");
    int m = 0;
    auto t = read_pixel_times(dir / "t.bin", m);
    REQUIRE(m == 8);
    for (std::size_t k = 0; k < t.size(); ++k) CHECK(t[k] == static_cast<float>(img.pixel_time[k]));
}
