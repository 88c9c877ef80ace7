#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "imls/image.hpp"

namespace imls {

using Color = std::array<float, 3>;

/// Distinct series colors, cycled.
Color palette(std::size_t k);

struct Series {
    std::vector<double> y;
    Color color{0, 0, 0};
};

/// Line chart on a white canvas with a frame and horizontal grid lines. The y
/// range covers all finite samples; x is the sample index.
Image line_chart(const std::vector<Series>& series, int width = 640, int height = 360);

/// One stacked bar per group; `stacks[g][s]` is the height of segment s in group g.
Image stacked_bars(const std::vector<std::vector<double>>& stacks, int width = 640, int height = 360);

}  // namespace imls
