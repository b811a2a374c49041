#pragma once

#include <array>
#include <vector>

#include "forge/types.hpp"

namespace forge {

/// A triangle after projection to pixel coordinates, ready to scan.
struct ScreenTriangle {
    int face = -1;
    std::array<Vector2d, 3> screen;
    std::array<double, 3> inv_depth{};
    double area = 0.0;  // signed edge-function area
    int x_min = 0, x_max = -1, y_min = 0, y_max = -1;
};

/// Per-pixel rasterization result. Barycentrics are perspective-correct.
struct FragmentBuffer {
    int width = 0;
    int height = 0;
    std::vector<int> face_id;                     // -1 where uncovered
    std::vector<std::array<double, 3>> bary;
    std::vector<double> inv_depth;

    FragmentBuffer() = default;
    FragmentBuffer(int w, int h)
        : width(w), height(h),
          face_id(static_cast<std::size_t>(w) * h, -1),
          bary(static_cast<std::size_t>(w) * h, std::array<double, 3>{0.0, 0.0, 0.0}),
          inv_depth(static_cast<std::size_t>(w) * h, 0.0) {}

    bool operator==(const FragmentBuffer&) const = default;
};

/// Evaluates triangle coverage at the centre of pixel (px, py). Returns false
/// outside the triangle; otherwise fills interpolated 1/depth and the
/// perspective-correct barycentrics.
inline bool fragment_at(const ScreenTriangle& tri, int px, int py, double& inv_depth,
                        std::array<double, 3>& bary) {
    const double x = px + 0.5;
    const double y = py + 0.5;
    const auto edge = [x, y](const Vector2d& a, const Vector2d& b) {
        return (b.x() - a.x()) * (y - a.y()) - (b.y() - a.y()) * (x - a.x());
    };
    const double b0 = edge(tri.screen[1], tri.screen[2]) / tri.area;
    const double b1 = edge(tri.screen[2], tri.screen[0]) / tri.area;
    const double b2 = edge(tri.screen[0], tri.screen[1]) / tri.area;
    if (b0 < 0.0 || b1 < 0.0 || b2 < 0.0) return false;
    const double q0 = b0 * tri.inv_depth[0];
    const double q1 = b1 * tri.inv_depth[1];
    const double q2 = b2 * tri.inv_depth[2];
    const double sum = q0 + q1 + q2;
    if (!(sum > 0.0)) return false;
    inv_depth = sum;
    bary = {q0 / sum, q1 / sum, q2 / sum};
    return true;
}

/// Depth test. Nearest fragment wins; exact ties go to the lower face id so
/// the result does not depend on submission order.
inline bool closer(double inv_depth, int face, double other_inv_depth, int other_face) {
    if (other_face < 0) return true;
    if (inv_depth != other_inv_depth) return inv_depth > other_inv_depth;
    return face < other_face;
}

}  // namespace forge
