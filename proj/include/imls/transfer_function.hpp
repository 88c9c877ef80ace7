#pragma once

#include <array>
#include <filesystem>
#include <vector>

namespace imls {

using Rgba = std::array<double, 4>;

struct ControlPoint {
    double scalar;
    Rgba rgba;
};

/// Piecewise-linear scalar -> rgba map. Knots strictly increasing, first at 0
/// and last at 1.
class TransferFunction {
public:
    explicit TransferFunction(std::vector<ControlPoint> points);

    /// Five knots, transparent below 0.1.
    static TransferFunction default_ramp();
    static TransferFunction from_file(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    [[nodiscard]] Rgba operator()(double s) const;
    [[nodiscard]] const std::vector<ControlPoint>& points() const { return points_; }

private:
    std::vector<ControlPoint> points_;
};

}  // namespace imls
