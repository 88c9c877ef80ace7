#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "imls/image.hpp"

namespace imls {

enum class PatternKind { Downsample, Foveal };
std::string to_string(PatternKind k);
PatternKind parse_pattern_kind(const std::string& s);

/// Binary full-resolution pixel selection provided by a reconstruction network.
struct SamplingPattern {
    BoolGrid grid;
    PatternKind kind = PatternKind::Downsample;
    int factor = 1;                         // downsample
    double sigma = 0.0;                     // foveal
    std::array<double, 2> center{0.0, 0.0};  // foveal, normalized [-1,1]

    [[nodiscard]] int resolution() const { return grid.size; }
    [[nodiscard]] std::size_t count() const { return grid.count(); }
};

enum class RandomKind { Plastic, BlueNoise, Uniform };
std::string to_string(RandomKind k);
RandomKind parse_random_kind(const std::string& s);

/// n x n values in [0,1).
struct RandomPattern {
    int size = 0;
    std::vector<double> values;
    RandomKind kind = RandomKind::Uniform;
    std::uint64_t seed = 0;
    std::array<double, 2> offset{0.0, 0.0};

    [[nodiscard]] double at(int i, int j) const { return values[static_cast<std::size_t>(i) * size + j]; }
};

/// Real root of x^3 = x + 1.
inline constexpr double kPlasticConstant = 1.32471795724474602596;

/// true at (i,j) iff i % factor == 0 and j % factor == 0.
SamplingPattern downsampling_pattern(int m, int factor);

/// k-th point = frac(offset + k * (1/rho, 1/rho^2)).
std::vector<std::array<double, 2>> plastic_sequence(int n_points, std::array<double, 2> offset);

/// Rasterizes the plastic sequence: point k claims the cell it lands in (or the
/// next free cell in raster order) and stores k / n^2. The grid is therefore a
/// permutation of {0, 1/n^2, ..., (n^2-1)/n^2}.
RandomPattern plastic_pattern(int n, std::array<double, 2> offset);

/// Toroidal offset for decorrelating plastic patterns between training batches.
std::array<double, 2> cranley_patterson_offset(std::uint64_t seed, std::uint64_t step);

enum class Execution { Serial, Parallel };

/// Void-and-cluster ranks divided by n^2. Serial and Parallel give identical grids.
RandomPattern blue_noise_pattern(int n, std::uint64_t seed, Execution exec = Execution::Parallel);

RandomPattern random_pattern(int n, RandomKind kind, std::uint64_t seed);

/// Keeps pixel (i,j) iff noise_ij <= exp(-0.5 * (dx^2 + dy^2) * sigma), with
/// (dx, dy) the pixel's normalized offset from `center`. The pixel closest to the
/// center is always kept.
SamplingPattern foveal_pattern(int m, double sigma, std::array<double, 2> center, const RandomPattern& noise);

/// Smallest sigma whose foveal pattern fits in `capacity` pixels.
double fit_foveal_sigma(int m, std::size_t capacity, std::array<double, 2> center, const RandomPattern& noise);

/// 8-bit PNG (255 = selected) plus `<stem>.json` parameter sidecar.
void save_pattern(const SamplingPattern& p, const std::filesystem::path& png_path);
SamplingPattern load_pattern(const std::filesystem::path& png_path);

}  // namespace imls
