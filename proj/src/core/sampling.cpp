#include "imls/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "imls/errors.hpp"
#include "imls/image_io.hpp"

namespace imls {

std::string to_string(PatternKind k) { return k == PatternKind::Downsample ? "downsample" : "foveal"; }

PatternKind parse_pattern_kind(const std::string& s) {
    if (s == "downsample") return PatternKind::Downsample;
    if (s == "foveal") return PatternKind::Foveal;
    throw ParameterError("unknown pattern kind '" + s + "'");
}

std::string to_string(RandomKind k) {
    switch (k) {
        case RandomKind::Plastic: return "plastic";
        case RandomKind::BlueNoise: return "blue_noise";
        case RandomKind::Uniform: return "uniform";
    }
    return "?";
}

RandomKind parse_random_kind(const std::string& s) {
    if (s == "plastic") return RandomKind::Plastic;
    if (s == "blue_noise") return RandomKind::BlueNoise;
    if (s == "uniform") return RandomKind::Uniform;
    throw ParameterError("unknown random pattern kind '" + s + "'");
}

SamplingPattern downsampling_pattern(int m, int factor) {
    if (m <= 0 || factor <= 0 || m % factor != 0)
        throw ParameterError("downsampling factor " + std::to_string(factor) + " does not divide " + std::to_string(m));
    SamplingPattern p;
    p.grid = BoolGrid(m);
    p.kind = PatternKind::Downsample;
    p.factor = factor;
    for (int i = 0; i < m; i += factor)
        for (int j = 0; j < m; j += factor) p.grid.set(i, j, true);
    return p;
}

namespace {
double frac(double x) { return x - std::floor(x); }
}  // namespace

std::vector<std::array<double, 2>> plastic_sequence(int n_points, std::array<double, 2> offset) {
    if (n_points < 1) throw ParameterError("plastic_sequence needs at least one point");
    const double a1 = 1.0 / kPlasticConstant;
    const double a2 = 1.0 / (kPlasticConstant * kPlasticConstant);
    std::vector<std::array<double, 2>> pts(static_cast<std::size_t>(n_points));
    for (int k = 0; k < n_points; ++k) pts[k] = {frac(offset[0] + k * a1), frac(offset[1] + k * a2)};
    return pts;
}

RandomPattern plastic_pattern(int n, std::array<double, 2> offset) {
    if (n < 1) throw ParameterError("random pattern size must be >= 1");
    const std::size_t total = static_cast<std::size_t>(n) * n;
    const auto pts = plastic_sequence(static_cast<int>(total), offset);
    RandomPattern out;
    out.size = n;
    out.kind = RandomKind::Plastic;
    out.offset = offset;
    out.values.assign(total, -1.0);
    const double inv = 1.0 / static_cast<double>(total);
    for (std::size_t k = 0; k < total; ++k) {
        const int col = std::min(static_cast<int>(pts[k][0] * n), n - 1);
        const int row = std::min(static_cast<int>(pts[k][1] * n), n - 1);
        std::size_t cell = static_cast<std::size_t>(row) * n + col;
        while (out.values[cell] >= 0.0) cell = (cell + 1) % total;
        out.values[cell] = static_cast<double>(k) * inv;
    }
    return out;
}

std::array<double, 2> cranley_patterson_offset(std::uint64_t seed, std::uint64_t step) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double a = uni(rng);
    return {a, uni(rng)};
}

namespace {

// Toroidal Gaussian energy with a truncated window, updated incrementally.
class EnergyField {
public:
    EnergyField(int n, double sigma) : n_(n), energy_(static_cast<std::size_t>(n) * n, 0.0) {
        radius_ = std::min(n / 2, static_cast<int>(std::ceil(4.0 * sigma)));
        const int w = 2 * radius_ + 1;
        kernel_.resize(static_cast<std::size_t>(w) * w);
        for (int dy = -radius_; dy <= radius_; ++dy)
            for (int dx = -radius_; dx <= radius_; ++dx)
                kernel_[(dy + radius_) * w + dx + radius_] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }

    void splat(std::size_t cell, double sign) {
        const int ci = static_cast<int>(cell / n_), cj = static_cast<int>(cell % n_);
        const int w = 2 * radius_ + 1;
        // With n even and radius n/2, the window wraps onto itself; skip duplicates.
        const int hi = (2 * radius_ + 1 > n_) ? radius_ - 1 : radius_;
        for (int dy = -radius_; dy <= hi; ++dy) {
            const int i = ((ci + dy) % n_ + n_) % n_;
            for (int dx = -radius_; dx <= hi; ++dx) {
                const int j = ((cj + dx) % n_ + n_) % n_;
                energy_[static_cast<std::size_t>(i) * n_ + j] += sign * kernel_[(dy + radius_) * w + dx + radius_];
            }
        }
    }

    [[nodiscard]] const std::vector<double>& energy() const { return energy_; }

private:
    int n_;
    int radius_;
    std::vector<double> kernel_;
    std::vector<double> energy_;
};

// Extreme energy among cells whose bit equals `want`; ties go to the lowest index.
std::size_t find_extreme(const std::vector<double>& e, const std::vector<unsigned char>& bits, bool want,
                         bool maximize, Execution exec) {
    const long total = static_cast<long>(e.size());
    auto better = [maximize](double a, double b) { return maximize ? a > b : a < b; };
    if (exec == Execution::Serial) {
        long best = -1;
        for (long k = 0; k < total; ++k) {
            if ((bits[k] != 0) != want) continue;
            if (best < 0 || better(e[k], e[best])) best = k;
        }
        return static_cast<std::size_t>(best);
    }
    long best = -1;
#pragma omp parallel
    {
        long local = -1;
#pragma omp for nowait schedule(static)
        for (long k = 0; k < total; ++k) {
            if ((bits[k] != 0) != want) continue;
            if (local < 0 || better(e[k], e[local])) local = k;
        }
#pragma omp critical
        {
            if (local >= 0 &&
                (best < 0 || better(e[local], e[best]) || (e[local] == e[best] && local < best)))
                best = local;
        }
    }
    return static_cast<std::size_t>(best);
}

}  // namespace

RandomPattern blue_noise_pattern(int n, std::uint64_t seed, Execution exec) {
    if (n < 1) throw ParameterError("random pattern size must be >= 1");
    const std::size_t total = static_cast<std::size_t>(n) * n;
    constexpr double kSigma = 1.5;
    RandomPattern out;
    out.size = n;
    out.kind = RandomKind::BlueNoise;
    out.seed = seed;
    out.values.assign(total, 0.0);
    if (total == 1) return out;

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t initial = std::max<std::size_t>(1, total / 10);

    std::vector<unsigned char> bits(total, 0);
    EnergyField field(n, kSigma);
    for (std::size_t k = 0; k < initial; ++k) {
        bits[order[k]] = 1;
        field.splat(order[k], +1.0);
    }
    // Relax the initial pattern until the tightest cluster is also the largest void.
    for (std::size_t iter = 0; iter < total; ++iter) {
        const std::size_t cluster = find_extreme(field.energy(), bits, true, true, exec);
        bits[cluster] = 0;
        field.splat(cluster, -1.0);
        const std::size_t vacancy = find_extreme(field.energy(), bits, false, false, exec);
        bits[vacancy] = 1;
        field.splat(vacancy, +1.0);
        if (vacancy == cluster) break;
    }

    std::vector<std::size_t> rank(total, 0);
    {
        auto b = bits;
        EnergyField f = field;
        for (std::size_t r = initial; r-- > 0;) {
            const std::size_t cluster = find_extreme(f.energy(), b, true, true, exec);
            b[cluster] = 0;
            f.splat(cluster, -1.0);
            rank[cluster] = r;
        }
    }
    for (std::size_t r = initial; r < total; ++r) {
        const std::size_t vacancy = find_extreme(field.energy(), bits, false, false, exec);
        bits[vacancy] = 1;
        field.splat(vacancy, +1.0);
        rank[vacancy] = r;
    }
    const double inv = 1.0 / static_cast<double>(total);
    for (std::size_t k = 0; k < total; ++k) out.values[k] = static_cast<double>(rank[k]) * inv;
    return out;
}

RandomPattern random_pattern(int n, RandomKind kind, std::uint64_t seed) {
    if (n < 1) throw ParameterError("random pattern size must be >= 1");
    switch (kind) {
        case RandomKind::Plastic: {
            auto p = plastic_pattern(n, cranley_patterson_offset(seed, 0));
            p.seed = seed;
            return p;
        }
        case RandomKind::BlueNoise: return blue_noise_pattern(n, seed);
        case RandomKind::Uniform: {
            RandomPattern p;
            p.size = n;
            p.kind = kind;
            p.seed = seed;
            p.values.resize(static_cast<std::size_t>(n) * n);
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            for (auto& v : p.values) v = uni(rng);
            return p;
        }
    }
    throw ParameterError("unknown random pattern kind");
}

SamplingPattern foveal_pattern(int m, double sigma, std::array<double, 2> center, const RandomPattern& noise) {
    if (!(sigma >= 0.0)) throw ParameterError("foveal sigma must be >= 0");
    if (noise.size != m) throw ParameterError("foveal noise must be m x m");
    SamplingPattern p;
    p.grid = BoolGrid(m);
    p.kind = PatternKind::Foveal;
    p.sigma = sigma;
    p.center = center;
    for (int i = 0; i < m; ++i) {
        const double dy = (2.0 * (i + 0.5) / m - 1.0) - center[1];
        for (int j = 0; j < m; ++j) {
            const double dx = (2.0 * (j + 0.5) / m - 1.0) - center[0];
            const double e = std::exp(-0.5 * (dx * dx + dy * dy) * sigma);
            p.grid.set(i, j, noise.at(i, j) <= e);
        }
    }
    const int ci = std::clamp(static_cast<int>(std::lround((center[1] + 1.0) * m / 2.0 - 0.5)), 0, m - 1);
    const int cj = std::clamp(static_cast<int>(std::lround((center[0] + 1.0) * m / 2.0 - 0.5)), 0, m - 1);
    p.grid.set(ci, cj, true);
    return p;
}

double fit_foveal_sigma(int m, std::size_t capacity, std::array<double, 2> center, const RandomPattern& noise) {
    if (capacity == 0) throw CapacityError("foveal capacity must be positive");
    auto count = [&](double s) { return foveal_pattern(m, s, center, noise).count(); };
    if (count(0.0) <= capacity) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (count(hi) > capacity) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e9) throw CapacityError("cannot fit foveal pattern into capacity");
    }
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (count(mid) > capacity ? lo : hi) = mid;
    }
    return hi;
}

void save_pattern(const SamplingPattern& p, const std::filesystem::path& png_path) {
    write_png(grid_to_image(p.grid), png_path);
    nlohmann::json j{{"kind", to_string(p.kind)}, {"m", p.resolution()}, {"factor", p.factor},
                     {"sigma", p.sigma},          {"center", p.center},  {"count", p.count()}};
    auto sidecar = png_path;
    sidecar.replace_extension(".json");
    std::ofstream(sidecar) << j.dump(2) << "\n";
}

SamplingPattern load_pattern(const std::filesystem::path& png_path) {
    const Image img = read_png(png_path);
    if (img.height != img.width) throw FormatError("pattern image must be square");
    SamplingPattern p;
    p.grid = BoolGrid(img.height);
    for (int i = 0; i < img.height; ++i)
        for (int j = 0; j < img.width; ++j) p.grid.set(i, j, img.at(i, j, 0) > 0.5f);
    auto sidecar = png_path;
    sidecar.replace_extension(".json");
    if (std::ifstream in{sidecar}) {
        auto j = nlohmann::json::parse(in);
        p.kind = parse_pattern_kind(j.at("kind").get<std::string>());
        p.factor = j.value("factor", 1);
        p.sigma = j.value("sigma", 0.0);
        p.center = j.value("center", std::array<double, 2>{0.0, 0.0});
    }
    return p;
}

}  // namespace imls
