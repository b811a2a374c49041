#include "forge/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "forge/body_model.hpp"
#include "forge/kernels.hpp"

namespace forge {
namespace {

constexpr double kNormalEpsilon = 1e-30;

void check_mesh(const Points& vertices, const Faces& faces) {
    for (Eigen::Index f = 0; f < faces.rows(); ++f)
        for (int k = 0; k < 3; ++k)
            if (faces(f, k) < 0 || faces(f, k) >= vertices.rows())
                throw std::invalid_argument("render: face index out of range");
}

std::vector<ScreenTriangle> setup_triangles(const Points& vertices, const Faces& faces, const CameraFrame& frame,
                                            int width, int height) {
    std::vector<ScreenTriangle> tris;
    tris.reserve(static_cast<std::size_t>(faces.rows()));
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        ScreenTriangle tri;
        tri.face = static_cast<int>(f);
        bool visible = true;
        for (int k = 0; k < 3; ++k) {
            const Vector3d cam = frame.to_camera(vertices.row(faces(f, k)).transpose());
            if (!(cam.z() > frame.near_depth)) {
                visible = false;
                break;
            }
            tri.screen[static_cast<std::size_t>(k)] = frame.to_screen(cam);
            tri.inv_depth[static_cast<std::size_t>(k)] = 1.0 / cam.z();
        }
        if (!visible) continue;
        const auto& s = tri.screen;
        tri.area = (s[1].x() - s[0].x()) * (s[2].y() - s[0].y()) - (s[1].y() - s[0].y()) * (s[2].x() - s[0].x());
        if (tri.area == 0.0 || !std::isfinite(tri.area)) continue;
        const double xmin = std::min({s[0].x(), s[1].x(), s[2].x()});
        const double xmax = std::max({s[0].x(), s[1].x(), s[2].x()});
        const double ymin = std::min({s[0].y(), s[1].y(), s[2].y()});
        const double ymax = std::max({s[0].y(), s[1].y(), s[2].y()});
        if (xmax < -1.0 || ymax < -1.0 || xmin > width + 1.0 || ymin > height + 1.0) continue;
        tri.x_min = std::max(0, static_cast<int>(std::floor(xmin - 0.5)));
        tri.x_max = std::min(width - 1, static_cast<int>(std::ceil(xmax - 0.5)));
        tri.y_min = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
        tri.y_max = std::min(height - 1, static_cast<int>(std::ceil(ymax - 0.5)));
        if (tri.x_max < tri.x_min || tri.y_max < tri.y_min) continue;
        tris.push_back(tri);
    }
    return tris;
}

RenderOutput prepare_output(RenderMode mode, const Points& vertices, const Faces& faces, const CameraParams& camera,
                            const Vector3d& background) {
    RenderOutput out;
    out.mode = mode;
    out.camera = camera;
    out.vertices = vertices;
    out.faces = faces;
    out.frags = rasterize_mesh(vertices, faces, camera);
    out.image = Image(camera.width, camera.height);
    out.coverage.assign(out.image.pixel_count(), 0);
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x) out.image.set_pixel(x, y, background);
    return out;
}

struct BilinearTaps {
    int x0, x1, y0, y1;
    double fx, fy;
    double scale_u, scale_v;  // d(texel x)/du and d(texel y)/dv
};

int wrap(int i, int n) {
    const int m = i % n;
    return m < 0 ? m + n : m;
}

BilinearTaps bilinear_taps(int width, int height, const Vector2d& uv) {
    const double x = uv.x() * width - 0.5;
    const double y = (1.0 - uv.y()) * height - 0.5;
    const double xf = std::floor(x), yf = std::floor(y);
    BilinearTaps t;
    t.fx = x - xf;
    t.fy = y - yf;
    const int xi = static_cast<int>(xf), yi = static_cast<int>(yf);
    t.x0 = wrap(xi, width);
    t.x1 = wrap(xi + 1, width);
    t.y0 = wrap(yi, height);
    t.y1 = wrap(yi + 1, height);
    t.scale_u = width;
    t.scale_v = -static_cast<double>(height);
    return t;
}

std::array<Vector3d, 3> face_vertices(const RenderOutput& out, int face) {
    return {out.vertices.row(out.faces(face, 0)).transpose(), out.vertices.row(out.faces(face, 1)).transpose(),
            out.vertices.row(out.faces(face, 2)).transpose()};
}

void check_grad_shape(const RenderOutput& output, const Image& pixel_grad) {
    if (!pixel_grad.same_shape(output.image))
        throw std::invalid_argument("backward: pixel gradient shape does not match the rendered image");
}

// Per-pixel contribution buffers are filled in parallel, then scattered
// serially in pixel order so the sums are reproducible.
struct PixelContribution {
    int face = -1;
    std::array<Vector3d, 3> a;  // per-corner gradient (attribute or position)
    std::array<Vector3d, 3> b;
};

// Gradients of the edge function E(a, b, p) with respect to a, b and p.
struct EdgeGrad {
    Vector2d a, b, p;
};
EdgeGrad edge_grad(const Vector2d& a, const Vector2d& b, const Vector2d& p) {
    return {{b.y() - p.y(), p.x() - b.x()}, {p.y() - a.y(), -(p.x() - a.x())}, {-(b.y() - a.y()), b.x() - a.x()}};
}

}  // namespace

std::vector<ScreenTriangle> project_triangles(const Points& vertices, const Faces& faces, const CameraParams& camera) {
    check_mesh(vertices, faces);
    return setup_triangles(vertices, faces, CameraFrame(camera), camera.width, camera.height);
}

FragmentBuffer rasterize_mesh(const Points& vertices, const Faces& faces, const CameraParams& camera) {
    check_mesh(vertices, faces);
    const CameraFrame frame(camera);
    FragmentBuffer frags(camera.width, camera.height);
    const auto tris = setup_triangles(vertices, faces, frame, camera.width, camera.height);
    kernels::omp::rasterize(tris, frags);
    return frags;
}

Vector3d sample_bilinear(const Image& texture, const Vector2d& uv) {
    if (texture.empty()) throw std::invalid_argument("sample_bilinear: empty texture");
    const BilinearTaps t = bilinear_taps(texture.width, texture.height, uv);
    return (1.0 - t.fy) * ((1.0 - t.fx) * texture.pixel(t.x0, t.y0) + t.fx * texture.pixel(t.x1, t.y0)) +
           t.fy * ((1.0 - t.fx) * texture.pixel(t.x0, t.y1) + t.fx * texture.pixel(t.x1, t.y1));
}

RenderOutput render_normal(const Points& vertices, const Faces& faces, const Points& normals, const CameraParams& camera) {
    if (normals.rows() != vertices.rows()) throw std::invalid_argument("render_normal: need one normal per vertex");
    RenderOutput out = prepare_output(RenderMode::normal, vertices, faces, camera, kNormalBackground);
    out.normals = normals;
    out.pixel_normal.assign(out.image.pixel_count(), Vector3d::Zero());
    const int w = camera.width, h = camera.height;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            const int face = out.frags.face_id[idx];
            if (face < 0) continue;
            const auto& b = out.frags.bary[idx];
            Vector3d m = Vector3d::Zero();
            for (int k = 0; k < 3; ++k) m += b[static_cast<std::size_t>(k)] * normals.row(faces(face, k)).transpose();
            out.pixel_normal[idx] = m;
            const double len = m.norm();
            const Vector3d n = len > kNormalEpsilon ? Vector3d(m / len) : Vector3d(0.0, 0.0, 1.0);
            out.image.set_pixel(x, y, 0.5 * (n + Vector3d::Ones()));
            out.coverage[idx] = 1;
        }
    }
    return out;
}

RenderOutput render_albedo(const Points& vertices, const Faces& faces, const UVs& uvs, const Image& albedo,
                           const CameraParams& camera) {
    if (uvs.rows() != vertices.rows()) throw std::invalid_argument("render_albedo: need one uv per vertex");
    if (albedo.empty()) throw std::invalid_argument("render_albedo: empty albedo map");
    RenderOutput out = prepare_output(RenderMode::albedo, vertices, faces, camera, kAlbedoBackground);
    out.uvs = uvs;
    out.albedo_width = albedo.width;
    out.albedo_height = albedo.height;
    out.pixel_uv.assign(out.image.pixel_count(), Vector2d::Zero());
    const int w = camera.width, h = camera.height;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            const int face = out.frags.face_id[idx];
            if (face < 0) continue;
            const auto& b = out.frags.bary[idx];
            Vector2d uv = Vector2d::Zero();
            for (int k = 0; k < 3; ++k) uv += b[static_cast<std::size_t>(k)] * uvs.row(faces(face, k)).transpose();
            out.pixel_uv[idx] = uv;
            out.image.set_pixel(x, y, sample_bilinear(albedo, uv));
            out.coverage[idx] = 1;
        }
    }
    return out;
}

Image backward_albedo(const RenderOutput& output, const Image& pixel_grad) {
    if (output.mode != RenderMode::albedo) throw std::invalid_argument("backward_albedo: output is not an albedo render");
    check_grad_shape(output, pixel_grad);
    Image grad(output.albedo_width, output.albedo_height);
    for (int y = 0; y < output.image.height; ++y)
        for (int x = 0; x < output.image.width; ++x) {
            if (!output.covered(x, y)) continue;
            const Vector3d g = pixel_grad.pixel(x, y);
            const BilinearTaps t =
                bilinear_taps(output.albedo_width, output.albedo_height, output.pixel_uv[static_cast<std::size_t>(y) * output.image.width + x]);
            const auto add = [&](int tx, int ty, double wgt) {
                if (wgt == 0.0) return;
                for (int c = 0; c < 3; ++c) grad.at(tx, ty, c) += wgt * g[c];
            };
            add(t.x0, t.y0, (1.0 - t.fx) * (1.0 - t.fy));
            add(t.x1, t.y0, t.fx * (1.0 - t.fy));
            add(t.x0, t.y1, (1.0 - t.fx) * t.fy);
            add(t.x1, t.y1, t.fx * t.fy);
        }
    return grad;
}

std::array<Vector3d, 3> barycentric_backward(const CameraFrame& frame, const std::array<Vector3d, 3>& world, int px,
                                             int py, const std::array<double, 3>& grad_bary) {
    std::array<Vector3d, 3> cam;
    std::array<Vector2d, 3> s;
    for (std::size_t i = 0; i < 3; ++i) {
        cam[i] = frame.to_camera(world[i]);
        s[i] = frame.to_screen(cam[i]);
    }
    const Vector2d p(px + 0.5, py + 0.5);
    const auto edge = [&p](const Vector2d& a, const Vector2d& b) {
        return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    };
    const double area = (s[1].x() - s[0].x()) * (s[2].y() - s[0].y()) - (s[1].y() - s[0].y()) * (s[2].x() - s[0].x());
    const std::array<double, 3> e{edge(s[1], s[2]), edge(s[2], s[0]), edge(s[0], s[1])};
    std::array<double, 3> b, q, beta;
    double qsum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        b[i] = e[i] / area;
        q[i] = b[i] / cam[i].z();
        qsum += q[i];
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        beta[i] = q[i] / qsum;
        dot += grad_bary[i] * beta[i];
    }

    std::array<double, 3> g_depth{};
    std::array<double, 3> g_e{};
    double g_area = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double g_q = (grad_bary[i] - dot) / qsum;
        const double g_b = g_q / cam[i].z();
        g_depth[i] = -g_q * b[i] / (cam[i].z() * cam[i].z());
        g_e[i] = g_b / area;
        g_area -= g_b * b[i] / area;
    }

    std::array<Vector2d, 3> g_s{Vector2d::Zero(), Vector2d::Zero(), Vector2d::Zero()};
    {
        const EdgeGrad e0 = edge_grad(s[1], s[2], p);
        g_s[1] += g_e[0] * e0.a;
        g_s[2] += g_e[0] * e0.b;
        const EdgeGrad e1 = edge_grad(s[2], s[0], p);
        g_s[2] += g_e[1] * e1.a;
        g_s[0] += g_e[1] * e1.b;
        const EdgeGrad e2 = edge_grad(s[0], s[1], p);
        g_s[0] += g_e[2] * e2.a;
        g_s[1] += g_e[2] * e2.b;
        const EdgeGrad ea = edge_grad(s[0], s[1], s[2]);
        g_s[0] += g_area * ea.a;
        g_s[1] += g_area * ea.b;
        g_s[2] += g_area * ea.p;
    }

    std::array<Vector3d, 3> out;
    const double f = frame.focal_px;
    for (std::size_t i = 0; i < 3; ++i) {
        const double d = cam[i].z();
        const double gx = g_s[i].x() * f / d;
        const double gy = -g_s[i].y() * f / d;
        const double gz = g_depth[i] - g_s[i].x() * f * cam[i].x() / (d * d) + g_s[i].y() * f * cam[i].y() / (d * d);
        out[i] = frame.right * gx + frame.up * gy + frame.forward * gz;
    }
    return out;
}

NormalRenderGrad backward_normal_attributes(const RenderOutput& output, const Image& pixel_grad) {
    if (output.mode != RenderMode::normal) throw std::invalid_argument("backward_normal: output is not a normal render");
    check_grad_shape(output, pixel_grad);
    const CameraFrame frame(output.camera);
    const int w = output.image.width, h = output.image.height;
    std::vector<PixelContribution> contrib(output.image.pixel_count());

#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            const int face = output.frags.face_id[idx];
            if (face < 0) continue;
            const Vector3d g_pix = pixel_grad.pixel(x, y);
            if (g_pix.isZero(0.0)) continue;
            const Vector3d m = output.pixel_normal[idx];
            const double len = m.norm();
            if (len <= kNormalEpsilon) continue;
            const Vector3d n = m / len;
            const Vector3d g_n = 0.5 * g_pix;
            const Vector3d g_m = (g_n - n * n.dot(g_n)) / len;
            const auto& bary = output.frags.bary[idx];
            PixelContribution& c = contrib[idx];
            c.face = face;
            std::array<double, 3> g_bary;
            for (std::size_t k = 0; k < 3; ++k) {
                c.a[k] = bary[k] * g_m;
                g_bary[k] = g_m.dot(output.normals.row(output.faces(face, static_cast<int>(k))).transpose());
            }
            c.b = barycentric_backward(frame, face_vertices(output, face), x, y, g_bary);
        }
    }

    NormalRenderGrad grad{Points::Zero(output.vertices.rows(), 3), Points::Zero(output.vertices.rows(), 3)};
    for (const auto& c : contrib) {
        if (c.face < 0) continue;
        for (int k = 0; k < 3; ++k) {
            const int v = output.faces(c.face, k);
            grad.normals.row(v) += c.a[static_cast<std::size_t>(k)].transpose();
            grad.positions.row(v) += c.b[static_cast<std::size_t>(k)].transpose();
        }
    }
    return grad;
}

Points backward_normal(const RenderOutput& output, const Image& pixel_grad) {
    const NormalRenderGrad attr = backward_normal_attributes(output, pixel_grad);
    return attr.positions + vertex_normals_backward(output.vertices, output.faces, attr.normals);
}

Points backward_albedo_geometry(const RenderOutput& output, const Image& albedo, const Image& pixel_grad) {
    if (output.mode != RenderMode::albedo) throw std::invalid_argument("backward_albedo_geometry: not an albedo render");
    check_grad_shape(output, pixel_grad);
    if (albedo.width != output.albedo_width || albedo.height != output.albedo_height)
        throw std::invalid_argument("backward_albedo_geometry: albedo map does not match the render");
    const CameraFrame frame(output.camera);
    const int w = output.image.width, h = output.image.height;
    std::vector<PixelContribution> contrib(output.image.pixel_count());

#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            const int face = output.frags.face_id[idx];
            if (face < 0) continue;
            const Vector3d g = pixel_grad.pixel(x, y);
            if (g.isZero(0.0)) continue;
            const BilinearTaps t = bilinear_taps(albedo.width, albedo.height, output.pixel_uv[idx]);
            const Vector3d t00 = albedo.pixel(t.x0, t.y0), t10 = albedo.pixel(t.x1, t.y0);
            const Vector3d t01 = albedo.pixel(t.x0, t.y1), t11 = albedo.pixel(t.x1, t.y1);
            const Vector3d d_fx = (1.0 - t.fy) * (t10 - t00) + t.fy * (t11 - t01);
            const Vector3d d_fy = (1.0 - t.fx) * (t01 - t00) + t.fx * (t11 - t10);
            const Vector2d g_uv(g.dot(d_fx) * t.scale_u, g.dot(d_fy) * t.scale_v);
            std::array<double, 3> g_bary;
            for (std::size_t k = 0; k < 3; ++k)
                g_bary[k] = g_uv.dot(output.uvs.row(output.faces(face, static_cast<int>(k))).transpose());
            PixelContribution& c = contrib[idx];
            c.face = face;
            c.b = barycentric_backward(frame, face_vertices(output, face), x, y, g_bary);
        }
    }
    Points grad = Points::Zero(output.vertices.rows(), 3);
    for (const auto& c : contrib) {
        if (c.face < 0) continue;
        for (int k = 0; k < 3; ++k) grad.row(output.faces(c.face, k)) += c.b[static_cast<std::size_t>(k)].transpose();
    }
    return grad;
}

}  // namespace forge
