#include "forge/camera.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace forge {
namespace {
double radians(double deg) { return deg * std::numbers::pi / 180.0; }
}  // namespace

void CameraParams::validate() const {
    if (!(fov_y_deg > 0.0 && fov_y_deg < 180.0)) throw std::invalid_argument("camera: fov_y must lie in (0, 180) degrees");
    if (!(distance > 0.0)) throw std::invalid_argument("camera: distance must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("camera: resolution must be positive");
    if (!look_at.allFinite() || !std::isfinite(azimuth_deg) || !std::isfinite(elevation_deg))
        throw std::invalid_argument("camera: non-finite parameters");
}

CameraFrame::CameraFrame(const CameraParams& cam) {
    cam.validate();
    const double az = radians(cam.azimuth_deg);
    const double el = radians(cam.elevation_deg);
    const Vector3d offset(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
    eye = cam.look_at + cam.distance * offset;
    forward = -offset;
    Vector3d r = forward.cross(Vector3d::UnitY());
    if (r.norm() < 1e-12) r = Vector3d(std::cos(az), 0.0, -std::sin(az));  // looking straight up or down
    right = r.normalized();
    up = right.cross(forward);
    focal_px = 0.5 * cam.height / std::tan(0.5 * radians(cam.fov_y_deg));
    cx = 0.5 * cam.width;
    cy = 0.5 * cam.height;
}

CameraParams sample_camera(const CameraPolicy& policy, Rng& rng) {
    const bool head = rng.uniform() < policy.head_probability;
    const ViewRange& range = head ? policy.head : policy.body;
    CameraParams cam;
    cam.azimuth_deg = rng.uniform(range.azimuth_min, range.azimuth_max);
    cam.elevation_deg = rng.uniform(range.elevation_min, range.elevation_max);
    cam.distance = rng.uniform(range.distance_min, range.distance_max);
    cam.fov_y_deg = range.fov_y_deg;
    cam.look_at = head ? policy.head_anchor : policy.body_anchor;
    cam.width = policy.width;
    cam.height = policy.height;
    return cam;
}

bool is_head_camera(const CameraPolicy& policy, const CameraParams& cam) {
    return cam.look_at == policy.head_anchor && cam.look_at != policy.body_anchor;
}

}  // namespace forge
