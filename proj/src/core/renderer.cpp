#include "imls/renderer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "imls/errors.hpp"

namespace imls {

using Clock = std::chrono::steady_clock;

void RenderConfig::validate() const {
    if (resolution < 8) throw ParameterError("render resolution must be >= 8");
    if (!(sample_distance > 0)) throw ParameterError("sample distance must be positive");
    if (!(fov_y_degrees > 0 && fov_y_degrees < 180)) throw ParameterError("field of view must be in (0,180)");
}

Ray build_ray(const ViewParams& view, const RenderConfig& cfg, int row, int col) {
    const int m = cfg.resolution;
    if (row < 0 || row >= m || col < 0 || col >= m) throw ParameterError("pixel outside the image");
    const CameraFrame f = camera_frame(view);
    const double half = std::tan(0.5 * cfg.fov_y_degrees * 3.14159265358979323846 / 180.0);
    const double x = (2.0 * (col + 0.5) / m - 1.0) * half;
    const double y = (1.0 - 2.0 * (row + 0.5) / m) * half;
    return {view.eye, normalized(f.forward + f.right * x + f.up * y)};
}

Rgb Compositor::resolve(const Rgba& background) const {
    Rgb out;
    for (int c = 0; c < 3; ++c) out[c] = std::clamp(color[c] + (1.0 - alpha) * background[c], 0.0, 1.0);
    return out;
}

Rgb shade(const Rgba& sample, const Vec3& gradient, const Vec3& view_dir, const Lighting& light) {
    const double g = length(gradient);
    if (g < 1e-6) return {sample[0], sample[1], sample[2]};
    const Vec3 n = gradient * (1.0 / g);
    // Headlight: light and half vector both point back along the ray.
    const double ndotl = std::abs(dot(n, view_dir));
    const double diffuse = light.ambient + light.diffuse * ndotl;
    const double spec = light.specular * std::pow(ndotl, light.shininess);
    return {sample[0] * diffuse + spec, sample[1] * diffuse + spec, sample[2] * diffuse + spec};
}

bool intersect_box(const Ray& ray, const std::array<double, 3>& extent, double& t_near, double& t_far) {
    t_near = 0.0;
    t_far = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a], d = ray.direction[a];
        if (std::abs(d) < 1e-15) {
            if (o < -extent[a] || o > extent[a]) return false;
            continue;
        }
        double t0 = (-extent[a] - o) / d, t1 = (extent[a] - o) / d;
        if (t0 > t1) std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
        if (t_near > t_far) return false;
    }
    return true;
}

Rgb march_ray(const Volume& v, const TransferFunction& tf, const RenderConfig& cfg, const Ray& ray) {
    double t0, t1;
    Compositor acc;
    if (intersect_box(ray, v.extent(), t0, t1)) {
        const Vec3 view_dir = -ray.direction;
        for (double t = t0; t <= t1; t += cfg.sample_distance) {
            const Vec3 p = ray.origin + ray.direction * t;
            const Rgba s = tf(v.sample(p));
            if (s[3] <= 0.0) continue;
            acc.add(shade(s, v.gradient(p), view_dir, cfg.lighting), s[3]);
            if (acc.alpha >= cfg.termination_opacity) break;
        }
    }
    return acc.resolve(cfg.background);
}

RayResult cast_ray(const Volume& v, const TransferFunction& tf, const RenderConfig& cfg, const Ray& ray) {
    const auto start = Clock::now();
    const Rgb rgb = march_ray(v, tf, cfg, ray);
    const auto stop = Clock::now();
    return {rgb, std::chrono::duration<double>(stop - start).count()};
}

double TimedImage::selective_render_seconds() const {
    double s = 0.0;
    for (std::size_t k = 0; k < pixel_time.size(); ++k)
        if (rendered.cells[k]) s += pixel_time[k];
    return s;
}

namespace {

TimedImage blank_image(const RenderConfig& cfg, const BoolGrid* mask, bool timed) {
    cfg.validate();
    const int m = cfg.resolution;
    if (mask && mask->size != m) throw ParameterError("mask size does not match render resolution");
    TimedImage out;
    out.rgb = Image(m, m, 3);
    for (std::size_t k = 0; k < out.rgb.pixel_count(); ++k)
        for (int c = 0; c < 3; ++c) out.rgb.data[k * 3 + c] = static_cast<float>(cfg.background[c]);
    out.pixel_time.assign(static_cast<std::size_t>(m) * m, 0.0);
    out.rendered = mask ? *mask : BoolGrid(m, true);
    out.timed = timed;
    return out;
}

// Precomputed per-image camera so the per-pixel cost is the march alone.
struct PixelCamera {
    Vec3 eye, forward, right, up;
    double half;
    int m;

    PixelCamera(const ViewParams& view, const RenderConfig& cfg) {
        const CameraFrame f = camera_frame(view);
        eye = view.eye;
        forward = f.forward;
        right = f.right;
        up = f.up;
        half = std::tan(0.5 * cfg.fov_y_degrees * 3.14159265358979323846 / 180.0);
        m = cfg.resolution;
    }
    [[nodiscard]] Ray ray(int row, int col) const {
        const double x = (2.0 * (col + 0.5) / m - 1.0) * half;
        const double y = (1.0 - 2.0 * (row + 0.5) / m) * half;
        return {eye, normalized(forward + right * x + up * y)};
    }
};

void store(Image& img, std::size_t k, const Rgb& c) {
    for (int ch = 0; ch < 3; ++ch) img.data[k * 3 + ch] = static_cast<float>(c[ch]);
}

}  // namespace

TimedImage render_image(const Volume& v, const TransferFunction& tf, const RenderConfig& cfg,
                        const ViewParams& view, const BoolGrid* mask) {
    TimedImage out = blank_image(cfg, mask, true);
    const PixelCamera cam(view, cfg);
    const int m = cfg.resolution;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * m + j;
            if (!out.rendered.cells[k]) continue;
            const Ray ray = cam.ray(i, j);
            const RayResult r = cast_ray(v, tf, cfg, ray);
            out.pixel_time[k] = r.elapsed_seconds;
            store(out.rgb, k, r.rgb);
        }
    return out;
}

TimedImage render_image_parallel(const Volume& v, const TransferFunction& tf, const RenderConfig& cfg,
                                 const ViewParams& view, const BoolGrid* mask) {
    TimedImage out = blank_image(cfg, mask, false);
    const PixelCamera cam(view, cfg);
    const int m = cfg.resolution;
    const long total = static_cast<long>(m) * m;
#pragma omp parallel for schedule(dynamic, 64)
    for (long k = 0; k < total; ++k) {
        if (!out.rendered.cells[k]) continue;
        const int i = static_cast<int>(k / m), j = static_cast<int>(k % m);
        store(out.rgb, static_cast<std::size_t>(k), march_ray(v, tf, cfg, cam.ray(i, j)));
    }
    return out;
}

double PixelBatch::total_seconds() const {
    double s = 0.0;
    for (double t : seconds) s += t;
    return s;
}

PixelBatch render_pixels(const Volume& v, const TransferFunction& tf, const RenderConfig& cfg,
                         const ViewParams& view, std::span<const std::uint32_t> raster_indices, bool timed) {
    cfg.validate();
    const PixelCamera cam(view, cfg);
    const std::uint32_t m = static_cast<std::uint32_t>(cfg.resolution);
    PixelBatch out;
    out.rgb.resize(raster_indices.size());
    if (timed) {
        out.seconds.resize(raster_indices.size());
        for (std::size_t k = 0; k < raster_indices.size(); ++k) {
            const std::uint32_t idx = raster_indices[k];
            if (idx >= m * m) throw ParameterError("raster index outside the image");
            const RayResult r = cast_ray(v, tf, cfg, cam.ray(static_cast<int>(idx / m), static_cast<int>(idx % m)));
            out.rgb[k] = r.rgb;
            out.seconds[k] = r.elapsed_seconds;
        }
        return out;
    }
    for (std::uint32_t idx : raster_indices)
        if (idx >= m * m) throw ParameterError("raster index outside the image");
    const long n = static_cast<long>(raster_indices.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (long k = 0; k < n; ++k) {
        const std::uint32_t idx = raster_indices[k];
        out.rgb[k] = march_ray(v, tf, cfg, cam.ray(static_cast<int>(idx / m), static_cast<int>(idx % m)));
    }
    return out;
}

void write_pixel_times(const TimedImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    const std::uint32_t header[2] = {static_cast<std::uint32_t>(img.rgb.height),
                                     static_cast<std::uint32_t>(img.rgb.width)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    for (double t : img.pixel_time) {
        const float f = static_cast<float>(t);
        out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
    if (!out) throw FormatError("failed writing " + path.string());
}

std::vector<float> read_pixel_times(const std::filesystem::path& path, int& size) {
    std::ifstream in(path, std::ios::binary);
    std::uint32_t header[2];
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) throw FormatError("truncated time grid");
    if (header[0] != header[1]) throw FormatError("time grid is not square");
    size = static_cast<int>(header[0]);
    std::vector<float> t(static_cast<std::size_t>(size) * size);
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float))))
        throw FormatError("truncated time grid");
    return t;
}

}  // namespace imls
