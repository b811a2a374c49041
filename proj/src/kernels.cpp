#include "forge/kernels.hpp"

#include <algorithm>

namespace forge::kernels {
namespace {

inline void skin_vertex(const Eigen::MatrixXd& weights, const SkinningTransforms& tf, const Points& in,
                        Points& out, Eigen::Index v) {
    const Vector3d p = in.row(v).transpose();
    Vector3d delta = Vector3d::Zero();
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
        const double w = weights(v, j);
        if (w == 0.0) continue;
        delta += w * ((tf.rotation[j] - Matrix3d::Identity()) * p + tf.translation[j]);
    }
    out.row(v) = (p + delta).transpose();
}

inline void scan_pixel(const ScreenTriangle& tri, int x, int y, FragmentBuffer& frags) {
    double inv_depth;
    std::array<double, 3> bary;
    if (!fragment_at(tri, x, y, inv_depth, bary)) return;
    const std::size_t idx = static_cast<std::size_t>(y) * frags.width + x;
    if (closer(inv_depth, tri.face, frags.inv_depth[idx], frags.face_id[idx])) {
        frags.inv_depth[idx] = inv_depth;
        frags.face_id[idx] = tri.face;
        frags.bary[idx] = bary;
    }
}

constexpr int kBandRows = 8;

}  // namespace

namespace serial {

void accumulate_basis(Points& out, const std::vector<Points>& basis, const Eigen::VectorXd& coeffs) {
    for (std::size_t k = 0; k < basis.size(); ++k) {
        const double c = coeffs[static_cast<Eigen::Index>(k)];
        if (c == 0.0) continue;
        for (Eigen::Index v = 0; v < out.rows(); ++v)
            for (int d = 0; d < 3; ++d) out(v, d) += c * basis[k](v, d);
    }
}

void skin(const Eigen::MatrixXd& weights, const SkinningTransforms& transforms, const Points& in, Points& out) {
    out.resize(in.rows(), 3);
    for (Eigen::Index v = 0; v < in.rows(); ++v) skin_vertex(weights, transforms, in, out, v);
}

void rasterize(const std::vector<ScreenTriangle>& triangles, FragmentBuffer& frags) {
    for (const auto& tri : triangles)
        for (int y = tri.y_min; y <= tri.y_max; ++y)
            for (int x = tri.x_min; x <= tri.x_max; ++x) scan_pixel(tri, x, y, frags);
}

}  // namespace serial

namespace omp {

void accumulate_basis(Points& out, const std::vector<Points>& basis, const Eigen::VectorXd& coeffs) {
    // Row blocks keep the per-element summation order of the serial kernel.
    constexpr Eigen::Index kBlock = 512;
    const Eigen::Index n = out.rows();
    const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static)
    for (Eigen::Index b = 0; b < blocks; ++b) {
        const Eigen::Index lo = b * kBlock, hi = std::min(n, lo + kBlock);
        for (std::size_t k = 0; k < basis.size(); ++k) {
            const double c = coeffs[static_cast<Eigen::Index>(k)];
            if (c == 0.0) continue;
            for (Eigen::Index v = lo; v < hi; ++v)
                for (int d = 0; d < 3; ++d) out(v, d) += c * basis[k](v, d);
        }
    }
}

void skin(const Eigen::MatrixXd& weights, const SkinningTransforms& transforms, const Points& in, Points& out) {
    out.resize(in.rows(), 3);
    const Eigen::Index n = in.rows();
#pragma omp parallel for schedule(static)
    for (Eigen::Index v = 0; v < n; ++v) skin_vertex(weights, transforms, in, out, v);
}

void rasterize(const std::vector<ScreenTriangle>& triangles, FragmentBuffer& frags) {
    const int bands = (frags.height + kBandRows - 1) / kBandRows;
    std::vector<std::vector<int>> binned(static_cast<std::size_t>(bands));
    for (std::size_t i = 0; i < triangles.size(); ++i) {
        const auto& tri = triangles[i];
        if (tri.y_max < tri.y_min || tri.x_max < tri.x_min) continue;
        for (int b = tri.y_min / kBandRows; b <= tri.y_max / kBandRows; ++b)
            binned[static_cast<std::size_t>(b)].push_back(static_cast<int>(i));
    }
#pragma omp parallel for schedule(dynamic, 1)
    for (int b = 0; b < bands; ++b) {
        const int row_lo = b * kBandRows;
        const int row_hi = std::min(frags.height, row_lo + kBandRows) - 1;
        for (int idx : binned[static_cast<std::size_t>(b)]) {
            const auto& tri = triangles[static_cast<std::size_t>(idx)];
            const int y0 = std::max(row_lo, tri.y_min);
            const int y1 = std::min(row_hi, tri.y_max);
            for (int y = y0; y <= y1; ++y)
                for (int x = tri.x_min; x <= tri.x_max; ++x) scan_pixel(tri, x, y, frags);
        }
    }
}

}  // namespace omp
}  // namespace forge::kernels
