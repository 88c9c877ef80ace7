#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "imls/errors.hpp"

namespace imls {

/// Interleaved (HWC) float image. Row i, column j, channel c lives at
/// ((i * width) + j) * channels + c.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    [[nodiscard]] std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
    [[nodiscard]] std::size_t index(int i, int j, int c = 0) const {
        return (static_cast<std::size_t>(i) * width + j) * channels + c;
    }
    float& at(int i, int j, int c = 0) { return data[index(i, j, c)]; }
    [[nodiscard]] float at(int i, int j, int c = 0) const { return data[index(i, j, c)]; }

    std::span<float> pixel(std::size_t flat) {
        return {data.data() + flat * channels, static_cast<std::size_t>(channels)};
    }
    [[nodiscard]] std::span<const float> pixel(std::size_t flat) const {
        return {data.data() + flat * channels, static_cast<std::size_t>(channels)};
    }

    [[nodiscard]] bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

/// Square boolean grid (row-major). Used for sampling patterns and render masks.
struct BoolGrid {
    int size = 0;
    std::vector<unsigned char> cells;

    BoolGrid() = default;
    explicit BoolGrid(int n, bool fill = false)
        : size(n), cells(static_cast<std::size_t>(n) * n, fill ? 1 : 0) {}

    [[nodiscard]] bool at(int i, int j) const { return cells[static_cast<std::size_t>(i) * size + j] != 0; }
    void set(int i, int j, bool v) { cells[static_cast<std::size_t>(i) * size + j] = v ? 1 : 0; }
    [[nodiscard]] std::size_t count() const {
        std::size_t n = 0;
        for (auto c : cells) n += c != 0;
        return n;
    }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": image shapes differ");
}

}  // namespace imls
