#include "imls/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "imls/errors.hpp"

namespace imls {

namespace {
double cubic(double p0, double p1, double p2, double p3, double t) {
    return p1 + 0.5 * t * (p2 - p0 + t * (2 * p0 - 5 * p1 + 4 * p2 - p3 + t * (3 * (p1 - p2) + p3 - p0)));
}
}  // namespace

Image bicubic_upscale(const Image& low, int factor) {
    if (factor < 1) throw ParameterError("upscale factor must be >= 1");
    Image out(low.height * factor, low.width * factor, low.channels);
    auto px = [&](int i, int j, int c) {
        return static_cast<double>(low.at(std::clamp(i, 0, low.height - 1), std::clamp(j, 0, low.width - 1), c));
    };
    for (int i = 0; i < out.height; ++i) {
        const double sy = (i + 0.5) / factor - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        const double ty = sy - y0;
        for (int j = 0; j < out.width; ++j) {
            const double sx = (j + 0.5) / factor - 0.5;
            const int x0 = static_cast<int>(std::floor(sx));
            const double tx = sx - x0;
            for (int c = 0; c < low.channels; ++c) {
                double rows[4];
                for (int r = 0; r < 4; ++r)
                    rows[r] = cubic(px(y0 + r - 1, x0 - 1, c), px(y0 + r - 1, x0, c), px(y0 + r - 1, x0 + 1, c),
                                    px(y0 + r - 1, x0 + 2, c), tx);
                out.at(i, j, c) = static_cast<float>(std::clamp(cubic(rows[0], rows[1], rows[2], rows[3], ty), 0.0, 1.0));
            }
        }
    }
    return out;
}

Image nearest_infill(const Image& img, const BoolGrid& known) {
    if (known.size != img.height || img.height != img.width) throw ShapeError("nearest_infill: mask/image mismatch");
    Image out(img.height, img.width, img.channels, 0.0f);
    std::vector<std::pair<int, int>> pts;
    for (int i = 0; i < img.height; ++i)
        for (int j = 0; j < img.width; ++j)
            if (known.at(i, j)) pts.emplace_back(i, j);
    if (pts.empty()) return out;
    for (int i = 0; i < img.height; ++i)
        for (int j = 0; j < img.width; ++j) {
            int best = 0;
            long bd = std::numeric_limits<long>::max();
            for (std::size_t k = 0; k < pts.size(); ++k) {
                const long di = pts[k].first - i, dj = pts[k].second - j;
                const long d = di * di + dj * dj;
                if (d < bd) {
                    bd = d;
                    best = static_cast<int>(k);
                    if (d == 0) break;
                }
            }
            for (int c = 0; c < img.channels; ++c) out.at(i, j, c) = img.at(pts[best].first, pts[best].second, c);
        }
    return out;
}

}  // namespace imls
