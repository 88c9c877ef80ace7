#include "imls/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

#include "imls/errors.hpp"

namespace imls {

namespace fs = std::filesystem;
using nlohmann::json;

DType parse_dtype(const std::string& tag) {
    if (tag == "uint16") return DType::UInt16;
    if (tag == "float32") return DType::Float32;
    if (tag == "float64") return DType::Float64;
    throw FormatError("unknown dtype tag '" + tag + "'");
}

std::string to_string(DType t) {
    switch (t) {
        case DType::UInt16: return "uint16";
        case DType::Float32: return "float32";
        case DType::Float64: return "float64";
    }
    return "?";
}

std::size_t dtype_size(DType t) {
    switch (t) {
        case DType::UInt16: return 2;
        case DType::Float32: return 4;
        case DType::Float64: return 8;
    }
    return 0;
}

DatasetManifest read_manifest(const fs::path& manifest_file) {
    std::ifstream in(manifest_file);
    if (!in) throw ManifestError("cannot open manifest " + manifest_file.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("manifest " + manifest_file.string() + ": " + e.what());
    }
    DatasetManifest m;
    try {
        m.name = j.value("name", manifest_file.stem().string());
        auto dims = j.at("dims").get<std::vector<int>>();
        if (dims.size() != 3) throw FormatError("manifest dims must have 3 entries");
        std::copy(dims.begin(), dims.end(), m.dims.begin());
        m.dtype = parse_dtype(j.at("dtype").get<std::string>());
        if (j.contains("spacing")) {
            auto sp = j.at("spacing").get<std::vector<double>>();
            if (sp.size() != 3) throw FormatError("manifest spacing must have 3 entries");
            std::copy(sp.begin(), sp.end(), m.spacing.begin());
        }
        fs::path raw = j.contains("path") ? fs::path(j.at("path").get<std::string>())
                                          : fs::path(manifest_file.stem().string() + ".raw");
        m.volume_path = raw.is_absolute() ? raw : manifest_file.parent_path() / raw;
    } catch (const json::exception& e) {
        throw FormatError("manifest " + manifest_file.string() + ": " + e.what());
    }
    for (int d : m.dims)
        if (d <= 0) throw ManifestError("manifest dims must be positive");
    for (double s : m.spacing)
        if (!(s > 0)) throw ManifestError("manifest spacing must be positive");
    return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& manifest_file) {
    json j{{"name", m.name},
           {"dims", m.dims},
           {"dtype", to_string(m.dtype)},
           {"spacing", m.spacing},
           {"path", m.volume_path.filename().string()}};
    std::ofstream out(manifest_file);
    out << j.dump(2) << "\n";
}

void validate_manifest(const DatasetManifest& m) {
    std::error_code ec;
    auto bytes = fs::file_size(m.volume_path, ec);
    if (ec) throw ManifestError("raw volume not found: " + m.volume_path.string());
    const std::uintmax_t expected = static_cast<std::uintmax_t>(m.dims[0]) * m.dims[1] * m.dims[2] *
                                    dtype_size(m.dtype);
    if (bytes != expected)
        throw ManifestError("raw volume " + m.volume_path.string() + " has " + std::to_string(bytes) +
                            " bytes, manifest implies " + std::to_string(expected));
}

std::array<double, 3> normalized_spacing(const std::array<int, 3>& dims,
                                         const std::array<double, 3>& physical) {
    double longest = 0.0;
    for (int a = 0; a < 3; ++a) longest = std::max(longest, (dims[a] - 1) * physical[a]);
    if (longest <= 0.0) return {1.0, 1.0, 1.0};
    const double s = 2.0 / longest;
    return {physical[0] * s, physical[1] * s, physical[2] * s};
}

Volume::Volume(std::array<int, 3> dims, std::array<double, 3> spacing, std::vector<float> values,
               DType source)
    : dims_(dims), spacing_(spacing), values_(std::move(values)), source_(source) {
    for (int a = 0; a < 3; ++a) {
        if (dims_[a] <= 0) throw ParameterError("volume dims must be positive");
        if (!(spacing_[a] > 0)) throw ParameterError("volume spacing must be positive");
        extent_[a] = 0.5 * (dims_[a] - 1) * spacing_[a];
        inv_spacing_[a] = 1.0 / spacing_[a];
    }
    if (values_.size() != static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2])
        throw ParameterError("volume value count does not match dims");
}

Vec3 Volume::node_position(int x, int y, int z) const {
    return {-extent_[0] + x * spacing_[0], -extent_[1] + y * spacing_[1], -extent_[2] + z * spacing_[2]};
}

double Volume::sample(const Vec3& p) const {
    double u[3];
    int i0[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
        u[a] = (p[a] + extent_[a]) * inv_spacing_[a];
        const double hi = dims_[a] - 1;
        // Tolerate round-off at the faces.
        if (u[a] < -1e-9 || u[a] > hi + 1e-9) return 0.0;
        u[a] = std::clamp(u[a], 0.0, hi);
        i0[a] = std::min(static_cast<int>(u[a]), std::max(dims_[a] - 2, 0));
        f[a] = u[a] - i0[a];
    }
    const int sx = dims_[0] > 1 ? 1 : 0;
    const std::size_t sy = dims_[1] > 1 ? static_cast<std::size_t>(dims_[0]) : 0;
    const std::size_t sz = dims_[2] > 1 ? static_cast<std::size_t>(dims_[0]) * dims_[1] : 0;
    const std::size_t base = (static_cast<std::size_t>(i0[2]) * dims_[1] + i0[1]) * dims_[0] + i0[0];
    const float* v = values_.data() + base;
    const double c00 = v[0] + (v[sx] - v[0]) * f[0];
    const double c10 = v[sy] + (v[sy + sx] - v[sy]) * f[0];
    const double c01 = v[sz] + (v[sz + sx] - v[sz]) * f[0];
    const double c11 = v[sz + sy] + (v[sz + sy + sx] - v[sz + sy]) * f[0];
    const double c0 = c00 + (c10 - c00) * f[1];
    const double c1 = c01 + (c11 - c01) * f[1];
    return c0 + (c1 - c0) * f[2];
}

Vec3 Volume::gradient(const Vec3& p) const {
    auto clamped = [&](Vec3 q) {
        return sample({std::clamp(q.x, -extent_[0], extent_[0]), std::clamp(q.y, -extent_[1], extent_[1]),
                       std::clamp(q.z, -extent_[2], extent_[2])});
    };
    const double hx = spacing_[0], hy = spacing_[1], hz = spacing_[2];
    return {(clamped(p + Vec3{hx, 0, 0}) - clamped(p - Vec3{hx, 0, 0})) / (2 * hx),
            (clamped(p + Vec3{0, hy, 0}) - clamped(p - Vec3{0, hy, 0})) / (2 * hy),
            (clamped(p + Vec3{0, 0, hz}) - clamped(p - Vec3{0, 0, hz})) / (2 * hz)};
}

void Volume::normalize() {
    if (values_.empty()) return;
    auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
    const double mn = *lo, mx = *hi;
    if (mx == mn) {
        std::fill(values_.begin(), values_.end(), 0.0f);
        return;
    }
    const double inv = 1.0 / (mx - mn);
    for (auto& v : values_) v = static_cast<float>((v - mn) * inv);
}

namespace {

template <typename T>
T read_le(const unsigned char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        auto* b = reinterpret_cast<unsigned char*>(&v);
        std::reverse(b, b + sizeof(T));
    }
    return v;
}

}  // namespace

Volume load_volume(DatasetManifest& m) {
    validate_manifest(m);
    const std::size_t count = static_cast<std::size_t>(m.dims[0]) * m.dims[1] * m.dims[2];
    const std::size_t elem = dtype_size(m.dtype);
    std::ifstream in(m.volume_path, std::ios::binary);
    if (!in) throw ManifestError("cannot open raw volume " + m.volume_path.string());

    std::vector<double> raw(count);
    constexpr std::size_t kChunk = 1 << 20;
    std::vector<unsigned char> buf(kChunk * elem);
    for (std::size_t off = 0; off < count; off += kChunk) {
        const std::size_t n = std::min(kChunk, count - off);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * elem));
        if (!in) throw ManifestError("short read from " + m.volume_path.string());
        for (std::size_t i = 0; i < n; ++i) {
            const unsigned char* p = buf.data() + i * elem;
            switch (m.dtype) {
                case DType::UInt16: raw[off + i] = read_le<std::uint16_t>(p); break;
                case DType::Float32: raw[off + i] = read_le<float>(p); break;
                case DType::Float64: raw[off + i] = read_le<double>(p); break;
            }
        }
    }
    auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    m.raw_min = *lo;
    m.raw_max = *hi;
    std::vector<float> values(count, 0.0f);
    if (m.raw_max > m.raw_min) {
        const double inv = 1.0 / (m.raw_max - m.raw_min);
        for (std::size_t i = 0; i < count; ++i) values[i] = static_cast<float>((raw[i] - m.raw_min) * inv);
    }
    return Volume(m.dims, normalized_spacing(m.dims, m.spacing), std::move(values), m.dtype);
}

Volume load_volume(const fs::path& manifest_file) {
    auto m = read_manifest(manifest_file);
    return load_volume(m);
}

void save_volume(const Volume& v, const std::string& name, const fs::path& manifest_file) {
    DatasetManifest m;
    m.name = name;
    m.dims = v.dims();
    m.dtype = DType::Float32;
    m.spacing = v.spacing();
    m.volume_path = manifest_file.parent_path() / (manifest_file.stem().string() + ".raw");
    std::ofstream out(m.volume_path, std::ios::binary);
    for (float x : v.values()) {
        unsigned char b[4];
        std::memcpy(b, &x, 4);
        if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + 4);
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    out.close();
    write_manifest(m, manifest_file);
}

SyntheticKind parse_synthetic_kind(const std::string& s) {
    if (s == "spheres") return SyntheticKind::Spheres;
    if (s == "turbulence") return SyntheticKind::Turbulence;
    if (s == "shell") return SyntheticKind::Shell;
    throw ParameterError("unknown synthetic volume kind '" + s + "'");
}

namespace {

// Hash-based lattice value in [0,1) for value noise.
double lattice_value(std::uint64_t seed, int x, int y, int z) {
    std::uint64_t h = seed ^ 0x9E3779B97F4A7C15ull;
    for (std::uint64_t k : {static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y),
                            static_cast<std::uint64_t>(z)}) {
        h ^= k + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        h *= 0xBF58476D1CE4E5B9ull;
        h ^= h >> 31;
    }
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(std::uint64_t seed, double x, double y, double z) {
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y)),
              z0 = static_cast<int>(std::floor(z));
    const double fx = smooth(x - x0), fy = smooth(y - y0), fz = smooth(z - z0);
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
                acc += w * lattice_value(seed, x0 + dx, y0 + dy, z0 + dz);
            }
    return acc;
}

}  // namespace

Volume generate_synthetic_volume(SyntheticKind kind, std::array<int, 3> dims, std::uint64_t seed) {
    for (int d : dims)
        if (d < 8) throw ParameterError("synthetic volume dims must be >= 8 per axis");
    const auto spacing = normalized_spacing(dims, {1.0, 1.0, 1.0});
    Volume grid(dims, spacing, std::vector<float>(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]));
    std::vector<float> values(grid.voxel_count());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    struct Sphere {
        Vec3 c;
        double r, density;
    };
    std::vector<Sphere> spheres;
    double phase[4] = {};
    if (kind == SyntheticKind::Spheres) {
        for (int k = 0; k < 14; ++k) {
            Vec3 c{uni(rng) * 1.3 - 0.65, uni(rng) * 1.3 - 0.65, uni(rng) * 1.3 - 0.65};
            spheres.push_back({c, 0.12 + 0.2 * uni(rng), 0.35 + 0.65 * uni(rng)});
        }
    } else if (kind == SyntheticKind::Shell) {
        for (double& p : phase) p = uni(rng) * 6.283185307179586;
    }

    for (int z = 0; z < dims[2]; ++z)
        for (int y = 0; y < dims[1]; ++y)
            for (int x = 0; x < dims[0]; ++x) {
                const Vec3 p = grid.node_position(x, y, z);
                double v = 0.0;
                switch (kind) {
                    case SyntheticKind::Spheres:
                        for (const auto& s : spheres) {
                            const double d = length(p - s.c) / s.r;
                            if (d < 1.0) {
                                // Dense core, soft rim.
                                v = std::max(v, s.density * (1.0 - d * d) * (0.75 + 0.25 * std::cos(9.0 * d)));
                            }
                        }
                        break;
                    case SyntheticKind::Turbulence: {
                        double amp = 1.0, freq = 2.5;
                        for (int o = 0; o < 4; ++o) {
                            v += amp * value_noise(seed + o, (p.x + 1) * freq, (p.y + 1) * freq, (p.z + 1) * freq);
                            amp *= 0.5;
                            freq *= 2.0;
                        }
                        break;
                    }
                    case SyntheticKind::Shell: {
                        const double r = length(p);
                        const double theta = std::atan2(p.y, p.x);
                        const double phi = r > 0 ? std::acos(std::clamp(p.z / r, -1.0, 1.0)) : 0.0;
                        const double radius =
                            0.6 + 0.06 * std::sin(3 * theta + phase[0]) * std::sin(2 * phi + phase[1]) +
                            0.03 * std::cos(5 * theta + phase[2]);
                        v = std::max(0.0, 1.0 - std::abs(r - radius) / 0.12);
                        break;
                    }
                }
                values[(static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x] = static_cast<float>(v);
            }
    Volume out(dims, spacing, std::move(values), DType::Float32);
    out.normalize();
    return out;
}

}  // namespace imls
