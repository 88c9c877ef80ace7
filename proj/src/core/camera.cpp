#include "imls/camera.hpp"

#include "imls/errors.hpp"

namespace imls {

std::array<float, 9> ViewParams::to_array() const {
    return {static_cast<float>(eye.x),     static_cast<float>(eye.y),     static_cast<float>(eye.z),
            static_cast<float>(look_at.x), static_cast<float>(look_at.y), static_cast<float>(look_at.z),
            static_cast<float>(up.x),      static_cast<float>(up.y),      static_cast<float>(up.z)};
}

ViewParams ViewParams::from_array(const std::array<float, 9>& a) {
    return {{a[0], a[1], a[2]}, {a[3], a[4], a[5]}, {a[6], a[7], a[8]}};
}

ViewParams ViewParams::from_array(const std::array<double, 9>& a) {
    return {{a[0], a[1], a[2]}, {a[3], a[4], a[5]}, {a[6], a[7], a[8]}};
}

void ViewParams::validate() const {
    const Vec3 f = look_at - eye;
    const double fl = length(f);
    if (!(fl > 1e-12)) throw ViewError("eye and lookAt coincide");
    const double ul = length(up);
    if (!(ul > 1e-12)) throw ViewError("up vector is zero");
    if (length(cross(f, up)) <= 1e-9 * fl * ul) throw ViewError("up is parallel to the view direction");
}

CameraFrame camera_frame(const ViewParams& view) {
    view.validate();
    const Vec3 forward = normalized(view.look_at - view.eye);
    const Vec3 right = normalized(cross(forward, view.up));
    const Vec3 up = cross(right, forward);
    return {forward, right, up};
}

}  // namespace imls
