#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <queue>
#include <random>

#include <json.hpp>

#include "imls/errors.hpp"
#include "imls/transfer_function.hpp"
#include "imls/volume.hpp"
#include "test_helpers.hpp"

using namespace imls;

namespace {

void write_manifest_json(const std::filesystem::path& p, std::array<int, 3> dims, const std::string& dtype,
                         const std::string& raw_name) {
    nlohmann::json j{{"name", "t"}, {"dims", dims}, {"dtype", dtype}, {"spacing", {1.0, 1.0, 1.0}}, {"path", raw_name}};
    std::ofstream(p) << j.dump();
}

template <typename T>
void write_raw(const std::filesystem::path& p, const std::vector<T>& v) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

}  // namespace

TEST_CASE("load_volume min-max normalizes uint16 data") {
    test::TempDir dir("vol");
    write_raw<std::uint16_t>(dir / "a.raw", {0, 1, 2, 3, 4, 5, 6, 7});
    write_manifest_json(dir / "a.json", {2, 2, 2}, "uint16", "a.raw");
    Volume v = load_volume(dir / "a.json");
    REQUIRE(v.voxel_count() == 8);
    for (int k = 0; k < 8; ++k) CHECK(v.values()[k] == doctest::Approx(k / 7.0).epsilon(1e-7));
    CHECK(v.source_dtype() == DType::UInt16);
    // Longest axis spans [-1, 1].
    CHECK(v.extent()[0] == doctest::Approx(1.0));
}

TEST_CASE("constant raw field normalizes to zeros") {
    test::TempDir dir("vol");
    write_raw<float>(dir / "c.raw", std::vector<float>(27, 7.0f));
    write_manifest_json(dir / "c.json", {3, 3, 3}, "float32", "c.raw");
    Volume v = load_volume(dir / "c.json");
    for (float x : v.values()) CHECK(x == 0.0f);
}

TEST_CASE("float64 volumes load") {
    test::TempDir dir("vol");
    write_raw<double>(dir / "d.raw", {-1.0, 1.0, 3.0, 1.0, -1.0, 1.0, 3.0, 1.0});
    write_manifest_json(dir / "d.json", {2, 2, 2}, "float64", "d.raw");
    DatasetManifest m = read_manifest(dir / "d.json");
    Volume v = load_volume(m);
    CHECK(m.raw_min == -1.0);
    CHECK(m.raw_max == 3.0);
    CHECK(v.values()[1] == doctest::Approx(0.5));
}

TEST_CASE("manifest errors") {
    test::TempDir dir("vol");
    write_raw<std::uint16_t>(dir / "s.raw", {1, 2, 3});
    write_manifest_json(dir / "s.json", {2, 2, 2}, "uint16", "s.raw");
    CHECK_THROWS_AS(load_volume(dir / "s.json"), ManifestError);
    write_manifest_json(dir / "u.json", {2, 2, 2}, "int8", "s.raw");
    CHECK_THROWS_AS(load_volume(dir / "u.json"), FormatError);
    write_manifest_json(dir / "m.json", {2, 2, 2}, "uint16", "missing.raw");
    CHECK_THROWS_AS(load_volume(dir / "m.json"), ManifestError);
}

TEST_CASE("Chameleon-sized manifest validates without reading the data") {
    test::TempDir dir("vol");
    // Sparse file with the exact byte length of a 1024^2 x 1088 uint16 dump.
    { std::ofstream(dir / "chameleon.raw").put('\0'); }
    std::filesystem::resize_file(dir / "chameleon.raw", 1024ull * 1024ull * 1088ull * 2ull);
    write_manifest_json(dir / "chameleon.json", {1024, 1024, 1088}, "uint16", "chameleon.raw");
    DatasetManifest m = read_manifest(dir / "chameleon.json");
    CHECK_NOTHROW(validate_manifest(m));
    CHECK(m.dims == std::array<int, 3>{1024, 1024, 1088});
    auto sp = normalized_spacing(m.dims, m.spacing);
    CHECK((m.dims[2] - 1) * sp[2] == doctest::Approx(2.0));
}

TEST_CASE("synthetic volumes are deterministic and normalized") {
    Volume a = generate_synthetic_volume(SyntheticKind::Spheres, {64, 64, 64}, 42);
    Volume b = generate_synthetic_volume(SyntheticKind::Spheres, {64, 64, 64}, 42);
    CHECK(a.values() == b.values());
    auto [lo, hi] = std::minmax_element(a.values().begin(), a.values().end());
    CHECK(*lo == 0.0f);
    CHECK(*hi == 1.0f);
    Volume c = generate_synthetic_volume(SyntheticKind::Spheres, {64, 64, 64}, 43);
    CHECK(a.values() != c.values());
    CHECK_THROWS_AS(generate_synthetic_volume(SyntheticKind::Shell, {7, 64, 64}, 1), ParameterError);
}

TEST_CASE("shell volume is one connected closed shell") {
    Volume v = generate_synthetic_volume(SyntheticKind::Shell, {64, 64, 64}, 1);
    const auto d = v.dims();
    auto idx = [&](int x, int y, int z) { return (static_cast<std::size_t>(z) * d[1] + y) * d[0] + x; };
    auto flood = [&](std::size_t start, bool nonzero) {
        std::vector<char> seen(v.voxel_count(), 0);
        std::queue<std::array<int, 3>> q;
        q.push({static_cast<int>(start % d[0]), static_cast<int>((start / d[0]) % d[1]),
                static_cast<int>(start / (static_cast<std::size_t>(d[0]) * d[1]))});
        seen[start] = 1;
        std::size_t n = 0;
        while (!q.empty()) {
            auto [x, y, z] = q.front();
            q.pop();
            ++n;
            const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
            for (auto& o : nb) {
                int X = x + o[0], Y = y + o[1], Z = z + o[2];
                if (X < 0 || Y < 0 || Z < 0 || X >= d[0] || Y >= d[1] || Z >= d[2]) continue;
                auto k = idx(X, Y, Z);
                if (seen[k] || ((v.values()[k] > 0.0f) != nonzero)) continue;
                seen[k] = 1;
                q.push({X, Y, Z});
            }
        }
        return std::make_pair(n, seen);
    };
    std::size_t nonzero = 0, first = 0;
    for (std::size_t k = 0; k < v.voxel_count(); ++k)
        if (v.values()[k] > 0.0f && nonzero++ == 0) first = k;
    REQUIRE(nonzero > 0);
    auto [reached, _] = flood(first, true);
    CHECK(reached == nonzero);
    // Interior is empty and sealed off from the corner.
    const auto center = idx(32, 32, 32);
    CHECK(v.values()[center] == 0.0f);
    auto [n_in, seen_in] = flood(center, false);
    CHECK(n_in > 0);
    CHECK(seen_in[idx(0, 0, 0)] == 0);
}

TEST_CASE("turbulence histogram is spread out") {
    Volume v = generate_synthetic_volume(SyntheticKind::Turbulence, {32, 32, 32}, 7);
    std::array<int, 64> bins{};
    for (float x : v.values()) bins[std::min(63, static_cast<int>(x * 64))]++;
    int occupied = 0;
    for (int b : bins) occupied += b > 0;
    CHECK(occupied >= 32);
}

TEST_CASE("trilinear sampling") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0, 1);
    const std::array<int, 3> dims{9, 7, 5};
    std::vector<float> vals(9 * 7 * 5);
    for (auto& x : vals) x = static_cast<float>(uni(rng));
    Volume v(dims, normalized_spacing(dims, {1, 1, 1}), vals);

    SUBCASE("grid values at nodes") {
        for (int z = 0; z < 5; ++z)
            for (int y = 0; y < 7; ++y)
                for (int x = 0; x < 9; ++x) CHECK(v.sample(v.node_position(x, y, z)) == doctest::Approx(v.voxel(x, y, z)));
    }
    SUBCASE("edge midpoint") {
        std::vector<float> e(8, 0.0f);
        e[0] = 0.2f;
        e[1] = 0.6f;
        Volume w({2, 2, 2}, {2.0, 2.0, 2.0}, e);
        CHECK(w.sample({0.0, -1.0, -1.0}) == doctest::Approx(0.4));
    }
    SUBCASE("constant cell") {
        Volume w({2, 2, 2}, {2.0, 2.0, 2.0}, std::vector<float>(8, 0.3f));
        for (int k = 0; k < 20; ++k)
            CHECK(w.sample({uni(rng) * 2 - 1, uni(rng) * 2 - 1, uni(rng) * 2 - 1}) == doctest::Approx(0.3));
    }
    SUBCASE("outside is zero") {
        CHECK(v.sample({1.5, 0, 0}) == 0.0);
        CHECK(v.sample({0, 0, -0.9}) == 0.0);  // z extent is 4/8 = 0.5
    }
}

TEST_CASE("trilinear linear precision on random interior points") {
    const std::array<int, 3> dims{17, 12, 9};
    Volume grid(dims, normalized_spacing(dims, {1, 1, 1}), std::vector<float>(17 * 12 * 9));
    const double a = 0.11, b = -0.07, c = 0.05, d = 0.4;
    std::vector<float> vals(grid.voxel_count());
    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                auto p = grid.node_position(x, y, z);
                vals[(static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x] = static_cast<float>(a * p.x + b * p.y + c * p.z + d);
            }
    Volume v(dims, grid.spacing(), vals);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-1, 1);
    for (int k = 0; k < 100; ++k) {
        Vec3 p{uni(rng) * v.extent()[0], uni(rng) * v.extent()[1], uni(rng) * v.extent()[2]};
        CHECK(std::abs(v.sample(p) - (a * p.x + b * p.y + c * p.z + d)) < 1e-6);
    }
}

TEST_CASE("normalization is idempotent") {
    Volume v = generate_synthetic_volume(SyntheticKind::Turbulence, {16, 16, 16}, 2);
    auto before = v.values();
    v.normalize();
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(std::abs(double(before[k]) - v.values()[k]) <= 1e-12);
}

TEST_CASE("transfer function interpolation") {
    TransferFunction two({{0.0, {0, 0, 0, 0}}, {1.0, {1, 1, 1, 1}}});
    auto mid = two(0.5);
    for (double c : mid) CHECK(c == doctest::Approx(0.5));

    TransferFunction three({{0.0, {0, 0, 0, 0}}, {0.4, {1, 0, 0, 0.2}}, {1.0, {0, 0, 1, 0.8}}});
    auto k = three(0.4);
    CHECK(k == Rgba{1, 0, 0, 0.2});
    // s = 0.55 is a quarter of the way from 0.4 to 1.0.
    auto q = three(0.55);
    CHECK(q[0] == doctest::Approx(0.75));
    CHECK(q[2] == doctest::Approx(0.25));
    CHECK(q[3] == doctest::Approx(0.35));

    // Outputs stay within the hull of the adjacent knots.
    auto tf = TransferFunction::default_ramp();
    const auto& pts = tf.points();
    for (int s = 0; s <= 1000; ++s) {
        const double x = s / 1000.0;
        auto out = tf(x);
        std::size_t hi = 1;
        while (hi + 1 < pts.size() && pts[hi].scalar < x) ++hi;
        for (int ch = 0; ch < 4; ++ch) {
            CHECK(out[ch] >= std::min(pts[hi - 1].rgba[ch], pts[hi].rgba[ch]) - 1e-12);
            CHECK(out[ch] <= std::max(pts[hi - 1].rgba[ch], pts[hi].rgba[ch]) + 1e-12);
        }
    }
    CHECK(tf(0.05)[3] == 0.0);
    CHECK_THROWS_AS(TransferFunction({{0.0, {0, 0, 0, 0}}, {0.0, {1, 1, 1, 1}}, {1.0, {1, 1, 1, 1}}}), ParameterError);
    CHECK_THROWS_AS(TransferFunction({{0.1, {0, 0, 0, 0}}, {1.0, {1, 1, 1, 1}}}), ParameterError);
}

TEST_CASE("transfer function file round trip") {
    test::TempDir dir("tf");
    auto tf = TransferFunction::default_ramp();
    tf.save(dir / "tf.json");
    auto back = TransferFunction::from_file(dir / "tf.json");
    REQUIRE(back.points().size() == tf.points().size());
    for (int s = 0; s <= 20; ++s) CHECK(back(s / 20.0) == tf(s / 20.0));
}
