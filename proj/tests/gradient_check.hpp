#pragma once

// Central finite-difference checks of the renderer's backward passes on small
// randomized scenes. Each check returns how many sampled entries were compared
// and how many met the relative tolerance.

#include <algorithm>
#include <random>
#include <vector>

#include "forge/body_io.hpp"
#include "forge/body_model.hpp"
#include "forge/renderer.hpp"
#include "test_support.hpp"

namespace forge::testing {

struct FdTally {
    int checked = 0;
    int passed = 0;
    double worst = 0.0;
    double pass_rate() const { return checked == 0 ? 0.0 : static_cast<double>(passed) / checked; }
};

/// A slightly jittered sphere seen from a random angle.
struct FdScene {
    Points vertices;
    Faces faces;
    UVs uvs;
    Image albedo;
    CameraParams camera;
};

inline FdScene make_fd_scene(std::uint64_t seed, int size = 64) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(-60.0, 60.0);
    const ParametricBody sphere = generate_sphere_body(10, 16, 1.0);
    FdScene s;
    s.vertices = sphere.template_vertices;
    for (Eigen::Index i = 0; i < s.vertices.size(); ++i) s.vertices.data()[i] += 0.03 * nd(gen);
    s.faces = sphere.faces;
    s.uvs = sphere.uv_coords;
    s.albedo = random_image(16, 16, gen);
    s.camera.azimuth_deg = u(gen);
    s.camera.elevation_deg = u(gen) / 3.0;
    s.camera.distance = 3.2;
    s.camera.width = s.camera.height = size;
    return s;
}

/// Albedo texels: the render is linear in the map, so agreement should be
/// near machine precision. Entries with |grad| <= 1e-4 are not counted.
inline FdTally check_albedo_gradient(const FdScene& s, int samples, std::mt19937_64& gen, double tol = 1e-3) {
    const Image g = random_image(s.camera.width, s.camera.height, gen, -1.0, 1.0);
    const RenderOutput out = render_albedo(s.vertices, s.faces, s.uvs, s.albedo, s.camera);
    const Image grad = backward_albedo(out, g);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < grad.data.size(); ++i)
        if (std::abs(grad.data[i]) > 1e-4) candidates.push_back(i);
    std::shuffle(candidates.begin(), candidates.end(), gen);
    if (candidates.size() > static_cast<std::size_t>(samples)) candidates.resize(static_cast<std::size_t>(samples));

    FdTally t;
    const double h = 1e-4;
    for (std::size_t i : candidates) {
        Image p = s.albedo, m = s.albedo;
        p.data[i] += h;
        m.data[i] -= h;
        const double fd = (dot(g, render_albedo(s.vertices, s.faces, s.uvs, p, s.camera).image) -
                           dot(g, render_albedo(s.vertices, s.faces, s.uvs, m, s.camera).image)) /
                          (2 * h);
        const double e = rel_err(grad.data[i], fd);
        t.worst = std::max(t.worst, e);
        ++t.checked;
        t.passed += e < tol;
    }
    return t;
}

/// Mask of pixels whose face id is the same in all three buffers.
inline Image stable_mask(const FragmentBuffer& a, const FragmentBuffer& b, const FragmentBuffer& c, const Image& g) {
    Image masked = g;
    for (std::size_t p = 0; p < a.face_id.size(); ++p)
        if (a.face_id[p] < 0 || a.face_id[p] != b.face_id[p] || a.face_id[p] != c.face_id[p])
            for (int k = 0; k < 3; ++k) masked.data[p * 3 + static_cast<std::size_t>(k)] = 0.0;
    return masked;
}

enum class GeometryPath { normal_image, albedo_image };

/// Vertex positions through the normal image (normals recomputed from the
/// perturbed positions) or through the albedo image's uv interpolation.
/// Only coverage-stable pixels enter both sides of the comparison.
inline FdTally check_geometry_gradient(const FdScene& s, GeometryPath path, int samples, std::mt19937_64& gen,
                                       double tol = 1e-2) {
    const Image g = random_image(s.camera.width, s.camera.height, gen, -1.0, 1.0);
    auto render = [&](const Points& v) {
        return path == GeometryPath::normal_image ? render_normal(v, s.faces, vertex_normals(v, s.faces), s.camera)
                                                  : render_albedo(v, s.faces, s.uvs, s.albedo, s.camera);
    };
    const RenderOutput base = render(s.vertices);
    const Points full = path == GeometryPath::normal_image ? backward_normal(base, g)
                                                           : backward_albedo_geometry(base, s.albedo, g);
    std::vector<Eigen::Index> candidates;
    for (Eigen::Index i = 0; i < full.size(); ++i)
        if (std::abs(full.data()[i]) > 1e-6) candidates.push_back(i);
    std::shuffle(candidates.begin(), candidates.end(), gen);
    if (candidates.size() > static_cast<std::size_t>(samples)) candidates.resize(static_cast<std::size_t>(samples));

    FdTally t;
    const double h = 1e-6;
    for (Eigen::Index i : candidates) {
        Points p = s.vertices, m = s.vertices;
        p.data()[i] += h;
        m.data()[i] -= h;
        const RenderOutput rp = render(p), rm = render(m);
        const Image gm = stable_mask(base.frags, rp.frags, rm.frags, g);
        const Points analytic = path == GeometryPath::normal_image ? backward_normal(base, gm)
                                                                   : backward_albedo_geometry(base, s.albedo, gm);
        const double fd = (dot(gm, rp.image) - dot(gm, rm.image)) / (2 * h);
        const double a = analytic.data()[i];
        if (std::max(std::abs(a), std::abs(fd)) < 1e-6) continue;
        const double e = rel_err(a, fd);
        t.worst = std::max(t.worst, e);
        ++t.checked;
        t.passed += e < tol;
    }
    return t;
}

}  // namespace forge::testing
