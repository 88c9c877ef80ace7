#include <doctest.h>

#include <cmath>
#include <random>

#include "imls/baselines.hpp"
#include "imls/errors.hpp"
#include "imls/image_io.hpp"
#include "imls/metrics.hpp"

using namespace imls;

namespace {

Image random_image(int h, int w, int c, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> uni(0, 1);
    Image img(h, w, c);
    for (auto& x : img.data) x = uni(rng);
    return img;
}

// Direct per-window SSIM, no separable filtering.
double ssim_brute_force(const Image& a, const Image& b) {
    double g[11][11], gs = 0;
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 11; ++x) gs += g[y][x] = std::exp(-((x - 5) * (x - 5) + (y - 5) * (y - 5)) / 4.5);
    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0;
    for (int ch = 0; ch < a.channels; ++ch) {
        double sum = 0;
        int windows = 0;
        for (int i = 0; i + 11 <= a.height; ++i)
            for (int j = 0; j + 11 <= a.width; ++j) {
                double mx = 0, my = 0;
                for (int y = 0; y < 11; ++y)
                    for (int x = 0; x < 11; ++x) {
                        mx += g[y][x] / gs * a.at(i + y, j + x, ch);
                        my += g[y][x] / gs * b.at(i + y, j + x, ch);
                    }
                double vx = 0, vy = 0, cxy = 0;
                for (int y = 0; y < 11; ++y)
                    for (int x = 0; x < 11; ++x) {
                        const double w = g[y][x] / gs, dx = a.at(i + y, j + x, ch) - mx, dy = b.at(i + y, j + x, ch) - my;
                        vx += w * dx * dx;
                        vy += w * dy * dy;
                        cxy += w * dx * dy;
                    }
                sum += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++windows;
            }
        total += sum / windows;
    }
    return total / a.channels;
}

}  // namespace

TEST_CASE("psnr reference values") {
    std::mt19937_64 rng(1);
    Image a = random_image(16, 16, 3, rng);
    CHECK(psnr(a, a) == kPsnrCap);
    Image b = a;
    for (auto& x : b.data) x = x > 0.5f ? x - 0.1f : x + 0.1f;  // uniform |error| 0.1
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));
    CHECK(psnr(a, b) == psnr(b, a));
    CHECK_THROWS_AS(psnr(a, Image(8, 8, 3)), ShapeError);
}

TEST_CASE("psnr matches its definition on random pairs") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 5; ++t) {
        Image a = random_image(20, 24, 3, rng), b = random_image(20, 24, 3, rng);
        double e = 0;
        for (std::size_t k = 0; k < a.data.size(); ++k) e += (double(a.data[k]) - b.data[k]) * (double(a.data[k]) - b.data[k]);
        e /= a.data.size();
        CHECK(psnr(a, b) == 10.0 * std::log10(1.0 / e));
    }
}

TEST_CASE("ssim matches brute force") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 5; ++t) {
        Image a = random_image(24, 20, 3, rng);
        Image b = a;
        std::normal_distribution<float> noise(0, 0.05f * (t + 1));
        for (auto& x : b.data) x = std::clamp(x + noise(rng), 0.0f, 1.0f);
        const double ref = ssim_brute_force(a, b);
        CHECK(std::abs(ssim(a, b, Execution::Parallel) - ref) < 1e-6);
        CHECK(std::abs(ssim(a, b, Execution::Serial) - ref) < 1e-6);
    }
    Image a = random_image(16, 16, 1, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0));
    CHECK_THROWS_AS(ssim(Image(8, 8, 1), Image(8, 8, 1)), ShapeError);
}

TEST_CASE("iou") {
    BoolGrid a(2), b(2);
    a.cells = {1, 1, 0, 0};
    b.cells = {1, 0, 1, 0};
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(iou(BoolGrid(2), BoolGrid(2)) == 1.0);
}

TEST_CASE("baselines") {
    Image flat(4, 4, 3, 0.25f);
    auto up = bicubic_upscale(flat, 2);
    CHECK(up.height == 8);
    for (float x : up.data) CHECK(x == doctest::Approx(0.25f));

    Image img(4, 4, 1, 0.0f);
    img.at(0, 0) = 1.0f;
    img.at(3, 3) = 0.5f;
    BoolGrid known(4);
    known.set(0, 0, true);
    known.set(3, 3, true);
    auto filled = nearest_infill(img, known);
    CHECK(filled.at(0, 1) == 1.0f);
    CHECK(filled.at(3, 2) == 0.5f);
}

TEST_CASE("png encode/decode round trip") {
    Image img(5, 7, 3);
    for (std::size_t k = 0; k < img.data.size(); ++k) img.data[k] = float(k % 256) / 255.0f;
    auto back = decode_png(encode_png(img));
    REQUIRE(back.same_shape(img));
    for (std::size_t k = 0; k < img.data.size(); ++k) CHECK(back.data[k] == doctest::Approx(img.data[k]).epsilon(1e-6));
    std::vector<std::uint8_t> bytes{0, 1, 2, 250, 255, 17};
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
    CHECK_THROWS_AS(decode_png({1, 2, 3}), FormatError);
}
