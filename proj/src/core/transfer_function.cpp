#include "imls/transfer_function.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "imls/errors.hpp"

namespace imls {

TransferFunction::TransferFunction(std::vector<ControlPoint> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw ParameterError("transfer function needs at least two control points");
    if (points_.front().scalar != 0.0 || points_.back().scalar != 1.0)
        throw ParameterError("transfer function must start at 0 and end at 1");
    for (std::size_t k = 0; k < points_.size(); ++k) {
        if (k > 0 && !(points_[k].scalar > points_[k - 1].scalar))
            throw ParameterError("transfer function scalars must be strictly increasing");
        for (double c : points_[k].rgba)
            if (c < 0.0 || c > 1.0) throw ParameterError("transfer function colors must lie in [0,1]");
    }
}

TransferFunction TransferFunction::default_ramp() {
    return TransferFunction({{0.0, {0.0, 0.0, 0.0, 0.0}},
                             {0.1, {0.10, 0.20, 0.60, 0.0}},
                             {0.35, {0.20, 0.60, 0.90, 0.08}},
                             {0.65, {0.95, 0.70, 0.30, 0.35}},
                             {1.0, {1.00, 0.95, 0.90, 0.80}}});
}

TransferFunction TransferFunction::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open transfer function " + path.string());
    std::vector<ControlPoint> pts;
    try {
        auto j = nlohmann::json::parse(in);
        for (const auto& row : j) {
            auto v = row.get<std::vector<double>>();
            if (v.size() != 5) throw FormatError("transfer function rows are [scalar, r, g, b, a]");
            pts.push_back({v[0], {v[1], v[2], v[3], v[4]}});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("transfer function: ") + e.what());
    }
    return TransferFunction(std::move(pts));
}

void TransferFunction::save(const std::filesystem::path& path) const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : points_) j.push_back({p.scalar, p.rgba[0], p.rgba[1], p.rgba[2], p.rgba[3]});
    std::ofstream(path) << j.dump() << "\n";
}

Rgba TransferFunction::operator()(double s) const {
    s = std::clamp(s, 0.0, 1.0);
    auto hi = std::upper_bound(points_.begin(), points_.end(), s,
                               [](double v, const ControlPoint& p) { return v < p.scalar; });
    if (hi == points_.end()) return points_.back().rgba;
    auto lo = hi - 1;
    const double t = (s - lo->scalar) / (hi->scalar - lo->scalar);
    Rgba out;
    for (int c = 0; c < 4; ++c) out[c] = lo->rgba[c] + t * (hi->rgba[c] - lo->rgba[c]);
    return out;
}

}  // namespace imls
