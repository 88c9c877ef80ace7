#include "imls/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace imls {

namespace {

constexpr int kMargin = 24;

void put(Image& img, int x, int y, const Color& c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    for (int k = 0; k < 3; ++k) img.at(y, x, k) = c[k];
}

void line(Image& img, int x0, int y0, int x1, int y1, const Color& c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        put(img, x0, y0, c);
        put(img, x0, y0 + 1, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) { err += dy; x0 += sx; }
        if (e2 <= dx) { err += dx; y0 += sy; }
    }
}

void rect(Image& img, int x0, int y0, int x1, int y1, const Color& c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
        for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) put(img, x, y, c);
}

Image canvas(int width, int height) {
    Image img(height, width, 3, 1.0f);
    const Color grid{0.88f, 0.88f, 0.88f};
    for (int g = 1; g < 4; ++g) {
        const int y = kMargin + g * (height - 2 * kMargin) / 4;
        line(img, kMargin, y, width - kMargin, y, grid);
    }
    const Color frame{0.2f, 0.2f, 0.2f};
    line(img, kMargin, kMargin, kMargin, height - kMargin, frame);
    line(img, kMargin, height - kMargin, width - kMargin, height - kMargin, frame);
    return img;
}

}  // namespace

Color palette(std::size_t k) {
    static const Color colors[] = {{0.12f, 0.47f, 0.71f}, {1.0f, 0.5f, 0.05f}, {0.17f, 0.63f, 0.17f},
                                   {0.84f, 0.15f, 0.16f}, {0.58f, 0.4f, 0.74f}, {0.55f, 0.34f, 0.29f}};
    return colors[k % std::size(colors)];
}

Image line_chart(const std::vector<Series>& series, int width, int height) {
    Image img = canvas(width, height);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t len = 0;
    for (const auto& s : series) {
        len = std::max(len, s.y.size());
        for (double v : s.y)
            if (std::isfinite(v)) { lo = std::min(lo, v); hi = std::max(hi, v); }
    }
    if (len == 0 || !std::isfinite(lo)) return img;
    if (hi - lo < 1e-12) { lo -= 0.5; hi += 0.5; }
    const double w = width - 2.0 * kMargin, h = height - 2.0 * kMargin;
    auto px = [&](std::size_t i) { return kMargin + static_cast<int>(len > 1 ? w * i / (len - 1) : w / 2); };
    auto py = [&](double v) { return height - kMargin - static_cast<int>(h * (v - lo) / (hi - lo)); };
    for (const auto& s : series)
        for (std::size_t i = 1; i < s.y.size(); ++i)
            if (std::isfinite(s.y[i - 1]) && std::isfinite(s.y[i]))
                line(img, px(i - 1), py(s.y[i - 1]), px(i), py(s.y[i]), s.color);
    return img;
}

Image stacked_bars(const std::vector<std::vector<double>>& stacks, int width, int height) {
    Image img = canvas(width, height);
    double top = 0;
    for (const auto& g : stacks) {
        double sum = 0;
        for (double v : g) sum += std::max(0.0, v);
        top = std::max(top, sum);
    }
    if (stacks.empty() || top <= 0) return img;
    const double slot = (width - 2.0 * kMargin) / stacks.size();
    const double h = height - 2.0 * kMargin;
    for (std::size_t g = 0; g < stacks.size(); ++g) {
        const int x0 = kMargin + static_cast<int>(slot * (g + 0.2));
        const int x1 = kMargin + static_cast<int>(slot * (g + 0.8));
        double base = 0;
        for (std::size_t s = 0; s < stacks[g].size(); ++s) {
            const double v = std::max(0.0, stacks[g][s]);
            const int y0 = height - kMargin - static_cast<int>(h * base / top);
            const int y1 = height - kMargin - static_cast<int>(h * (base + v) / top);
            if (y1 < y0) rect(img, x0, y0 - 1, x1, y1, palette(s));
            base += v;
        }
    }
    return img;
}

}  // namespace imls
