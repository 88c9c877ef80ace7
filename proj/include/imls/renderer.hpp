#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "imls/camera.hpp"
#include "imls/image.hpp"
#include "imls/transfer_function.hpp"
#include "imls/volume.hpp"

namespace imls {

struct Lighting {
    double ambient = 0.2;
    double diffuse = 0.7;
    double specular = 0.1;
    double shininess = 32.0;
};

struct RenderConfig {
    int resolution = 128;
    double sample_distance = 0.02;
    double fov_y_degrees = 45.0;
    Lighting lighting{};
    Rgba background{0.0, 0.0, 0.0, 1.0};
    double termination_opacity = 0.99;

    void validate() const;
};

using Rgb = std::array<double, 3>;

/// Pinhole ray through the center of pixel (row, col); row 0 is the top.
Ray build_ray(const ViewParams& view, const RenderConfig& cfg, int row, int col);

/// Front-to-back emission-absorption accumulator.
struct Compositor {
    Rgb color{0, 0, 0};
    double alpha = 0.0;

    void add(const Rgb& c, double a) {
        const double w = (1.0 - alpha) * a;
        color[0] += w * c[0];
        color[1] += w * c[1];
        color[2] += w * c[2];
        alpha += w;
    }
    /// Composites over an opaque background and clamps to [0,1].
    [[nodiscard]] Rgb resolve(const Rgba& background) const;
};

/// Blinn-Phong with a headlight (light along -view direction). Falls back to
/// the unshaded color where the gradient vanishes.
Rgb shade(const Rgba& sample, const Vec3& gradient, const Vec3& view_dir, const Lighting& light);

/// Ray/box slab test against [-e,e]. Returns false on miss.
bool intersect_box(const Ray& ray, const std::array<double, 3>& extent, double& t_near, double& t_far);

/// Untimed ray march.
Rgb march_ray(const Volume& v, const TransferFunction& tf, const RenderConfig& cfg, const Ray& ray);

struct RayResult {
    Rgb rgb;
    double elapsed_seconds;
};
/// march_ray bracketed by a monotonic clock.
RayResult cast_ray(const Volume& v, const TransferFunction& tf, const RenderConfig& cfg, const Ray& ray);

/// RGB image plus the per-pixel render time that backs T_SR = sum of T_k.
struct TimedImage {
    Image rgb;
    std::vector<double> pixel_time;  // seconds, row-major
    BoolGrid rendered;
    bool timed = true;

    /// Sum of per-pixel times over rendered pixels.
    [[nodiscard]] double selective_render_seconds() const;
};

/// Single-threaded latency-measurement mode. Pass nullptr for an all-ones mask.
TimedImage render_image(const Volume& v, const TransferFunction& tf, const RenderConfig& cfg,
                        const ViewParams& view, const BoolGrid* mask = nullptr);

/// OpenMP throughput mode over pixels; no per-pixel times (timed == false).
TimedImage render_image_parallel(const Volume& v, const TransferFunction& tf, const RenderConfig& cfg,
                                 const ViewParams& view, const BoolGrid* mask = nullptr);

/// Renders the listed raster indices in order. Returns rgb per listed pixel and,
/// when `timed`, per-pixel seconds.
struct PixelBatch {
    std::vector<Rgb> rgb;
    std::vector<double> seconds;
    [[nodiscard]] double total_seconds() const;
};
PixelBatch render_pixels(const Volume& v, const TransferFunction& tf, const RenderConfig& cfg,
                         const ViewParams& view, std::span<const std::uint32_t> raster_indices,
                         bool timed = true);

/// Flat float32 grid with a {m, m} uint32 header.
void write_pixel_times(const TimedImage& img, const std::filesystem::path& path);
std::vector<float> read_pixel_times(const std::filesystem::path& path, int& size);

}  // namespace imls
