#pragma once

#include <array>

#include "imls/vec.hpp"

namespace imls {

/// Camera as the 9-float (eye, lookAt, up) triple.
struct ViewParams {
    Vec3 eye{0, 0, 3};
    Vec3 look_at{0, 0, 0};
    Vec3 up{0, 1, 0};

    [[nodiscard]] std::array<float, 9> to_array() const;
    static ViewParams from_array(const std::array<float, 9>& a);
    static ViewParams from_array(const std::array<double, 9>& a);

    /// Throws ViewError when eye == lookAt or up is parallel to the view direction.
    void validate() const;
    bool operator==(const ViewParams&) const = default;
};

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length
};

/// Orthonormal camera frame derived from a view.
struct CameraFrame {
    Vec3 forward, right, up;
};
CameraFrame camera_frame(const ViewParams& view);

}  // namespace imls
