#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "imls/vec.hpp"

namespace imls {

enum class DType { UInt16, Float32, Float64 };

DType parse_dtype(const std::string& tag);
std::string to_string(DType t);
std::size_t dtype_size(DType t);

/// Sidecar description of a raw little-endian, x-fastest scalar dump.
struct DatasetManifest {
    std::string name;
    std::filesystem::path volume_path;
    std::array<int, 3> dims{};
    DType dtype = DType::Float32;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    // Filled by load_volume from the data itself.
    double raw_min = 0.0;
    double raw_max = 0.0;
};

/// Reads `{name, dims, dtype, spacing[, path]}`. A missing `path` defaults to
/// the manifest's stem with a `.raw` extension, resolved next to the manifest.
DatasetManifest read_manifest(const std::filesystem::path& manifest_file);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& manifest_file);

/// Throws ManifestError unless the raw file exists and its byte length equals
/// dims product times dtype size.
void validate_manifest(const DatasetManifest& m);

/// Normalized scalar field. Grid nodes span [-extent, extent] per axis and the
/// longest axis has extent 1. Values are in [0,1].
class Volume {
public:
    Volume() = default;
    Volume(std::array<int, 3> dims, std::array<double, 3> spacing, std::vector<float> values,
           DType source = DType::Float32);

    [[nodiscard]] const std::array<int, 3>& dims() const { return dims_; }
    /// World-space distance between neighbouring nodes, per axis.
    [[nodiscard]] const std::array<double, 3>& spacing() const { return spacing_; }
    [[nodiscard]] const std::array<double, 3>& extent() const { return extent_; }
    [[nodiscard]] DType source_dtype() const { return source_; }
    [[nodiscard]] const std::vector<float>& values() const { return values_; }
    [[nodiscard]] std::size_t voxel_count() const { return values_.size(); }

    [[nodiscard]] float voxel(int x, int y, int z) const {
        return values_[(static_cast<std::size_t>(z) * dims_[1] + y) * dims_[0] + x];
    }
    [[nodiscard]] Vec3 node_position(int x, int y, int z) const;

    /// Trilinear interpolation; 0 outside the extent.
    [[nodiscard]] double sample(const Vec3& p) const;
    /// Central-difference gradient of the interpolated field.
    [[nodiscard]] Vec3 gradient(const Vec3& p) const;

    /// Min-max normalizes in place. A degenerate range maps to all zeros.
    void normalize();

private:
    std::array<int, 3> dims_{};
    std::array<double, 3> spacing_{};
    std::array<double, 3> extent_{};
    std::array<double, 3> inv_spacing_{};
    std::vector<float> values_;
    DType source_ = DType::Float32;
};

/// Rescales physical spacing so the longest axis spans [-1,1].
std::array<double, 3> normalized_spacing(const std::array<int, 3>& dims,
                                         const std::array<double, 3>& physical);

Volume load_volume(DatasetManifest& manifest);
Volume load_volume(const std::filesystem::path& manifest_file);

/// Writes values as float32 raw plus manifest.
void save_volume(const Volume& v, const std::string& name, const std::filesystem::path& manifest_file);

enum class SyntheticKind { Spheres, Turbulence, Shell };
SyntheticKind parse_synthetic_kind(const std::string& s);

/// Deterministic for fixed (kind, dims, seed). Requires every dim >= 8.
Volume generate_synthetic_volume(SyntheticKind kind, std::array<int, 3> dims, std::uint64_t seed);

}  // namespace imls
