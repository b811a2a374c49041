#pragma once

#include "forge/rng.hpp"
#include "forge/types.hpp"

namespace forge {

/// Orbit camera around `look_at`. Azimuth 0 looks at the front (+z side) of
/// the subject; positive elevation looks down from above. y is up.
struct CameraParams {
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
    double distance = 3.0;
    double fov_y_deg = 40.0;
    Vector3d look_at = Vector3d::Zero();
    int width = 64;
    int height = 64;

    /// Throws std::invalid_argument when fov, distance or resolution are out of range.
    void validate() const;
    bool operator==(const CameraParams&) const = default;
};

/// Derived pinhole model in pixel units.
struct CameraFrame {
    Vector3d eye;
    Vector3d right, up, forward;
    double focal_px = 0.0;  // same for x and y (square pixels)
    double cx = 0.0, cy = 0.0;
    double near_depth = 1e-3;

    explicit CameraFrame(const CameraParams& cam);

    /// Camera-space coordinates (x right, y up, depth along the view direction).
    Vector3d to_camera(const Vector3d& p) const {
        const Vector3d d = p - eye;
        return {right.dot(d), up.dot(d), forward.dot(d)};
    }
    /// Pixel coordinates; y grows downward.
    Vector2d to_screen(const Vector3d& cam) const {
        return {cx + focal_px * cam.x() / cam.z(), cy - focal_px * cam.y() / cam.z()};
    }
};

struct ViewRange {
    double azimuth_min = -180.0, azimuth_max = 180.0;
    double elevation_min = -10.0, elevation_max = 30.0;
    double distance_min = 2.6, distance_max = 3.0;
    double fov_y_deg = 40.0;
    bool operator==(const ViewRange&) const = default;
};

/// Camera sampling policy: full-body framing, or with probability
/// `head_probability` a close-up centred on the head anchor.
struct CameraPolicy {
    ViewRange body;
    ViewRange head{-90.0, 90.0, -10.0, 20.0, 0.7, 0.9, 40.0};
    double head_probability = 0.2;
    Vector3d body_anchor = Vector3d::Zero();
    Vector3d head_anchor = Vector3d::Zero();
    int width = 64;
    int height = 64;
};

/// Draws one camera. Always consumes exactly four uniforms from `rng`.
CameraParams sample_camera(const CameraPolicy& policy, Rng& rng);

/// True when `cam` was framed on the head anchor by `policy`.
bool is_head_camera(const CameraPolicy& policy, const CameraParams& cam);

}  // namespace forge
