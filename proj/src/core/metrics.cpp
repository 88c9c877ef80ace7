#include "imls/metrics.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "imls/errors.hpp"

namespace imls {

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "mse");
    if (a.data.empty()) throw ShapeError("mse: empty images");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.data.size(); ++k) {
        const double d = static_cast<double>(a.data[k]) - b.data[k];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
    const double e = mse(a, b);
    if (e < 1e-10) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps() {
    std::array<double, kWindow> w{};
    double sum = 0.0;
    for (int k = 0; k < kWindow; ++k) {
        const double x = k - kWindow / 2;
        w[k] = std::exp(-x * x / (2 * kSigma * kSigma));
        sum += w[k];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// Valid-region separable filter of one channel (and products) into five moment maps.
double ssim_channel(const Image& a, const Image& b, int ch, Execution exec) {
    static const auto taps = gaussian_taps();
    const int h = a.height, w = a.width;
    const int oh = h - kWindow + 1, ow = w - kWindow + 1;
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

    // Horizontal pass: 5 moments per (row, output column).
    std::vector<double> hx(static_cast<std::size_t>(h) * ow * 5);
    auto horizontal = [&](int i) {
        for (int j = 0; j < ow; ++j) {
            double s[5] = {0, 0, 0, 0, 0};
            for (int k = 0; k < kWindow; ++k) {
                const double x = a.at(i, j + k, ch), y = b.at(i, j + k, ch), t = taps[k];
                s[0] += t * x;
                s[1] += t * y;
                s[2] += t * x * x;
                s[3] += t * y * y;
                s[4] += t * x * y;
            }
            for (int q = 0; q < 5; ++q) hx[(static_cast<std::size_t>(i) * ow + j) * 5 + q] = s[q];
        }
    };
    auto vertical = [&](int i) {
        double row_sum = 0.0;
        for (int j = 0; j < ow; ++j) {
            double s[5] = {0, 0, 0, 0, 0};
            for (int k = 0; k < kWindow; ++k)
                for (int q = 0; q < 5; ++q) s[q] += taps[k] * hx[(static_cast<std::size_t>(i + k) * ow + j) * 5 + q];
            const double mx = s[0], my = s[1];
            const double vx = s[2] - mx * mx, vy = s[3] - my * my, cxy = s[4] - mx * my;
            row_sum += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
        return row_sum;
    };

    double total = 0.0;
    if (exec == Execution::Serial) {
        for (int i = 0; i < h; ++i) horizontal(i);
        for (int i = 0; i < oh; ++i) total += vertical(i);
    } else {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < h; ++i) horizontal(i);
#pragma omp parallel for schedule(static) reduction(+ : total)
        for (int i = 0; i < oh; ++i) total += vertical(i);
    }
    return total / (static_cast<double>(oh) * ow);
}

}  // namespace

double ssim(const Image& a, const Image& b, Execution exec) {
    require_same_shape(a, b, "ssim");
    if (a.height < kWindow || a.width < kWindow) throw ShapeError("ssim: images smaller than the 11x11 window");
    double acc = 0.0;
    for (int ch = 0; ch < a.channels; ++ch) acc += ssim_channel(a, b, ch, exec);
    return acc / a.channels;
}

double iou(const BoolGrid& a, const BoolGrid& b) {
    if (a.size != b.size) throw ShapeError("iou: mask sizes differ");
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < a.cells.size(); ++k) {
        inter += (a.cells[k] && b.cells[k]);
        uni += (a.cells[k] || b.cells[k]);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace imls
