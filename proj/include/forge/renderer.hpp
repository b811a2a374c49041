#pragma once

#include <array>
#include <vector>

#include "forge/camera.hpp"
#include "forge/raster.hpp"
#include "forge/types.hpp"

namespace forge {

enum class RenderMode { normal, albedo };

inline const Vector3d kNormalBackground{0.5, 0.5, 1.0};
inline const Vector3d kAlbedoBackground{1.0, 1.0, 1.0};

/// Image plus everything the backward passes need: the fragment buffer and a
/// snapshot of the scene that produced it.
struct RenderOutput {
    RenderMode mode = RenderMode::normal;
    Image image;
    std::vector<std::uint8_t> coverage;  // 1 where a face was hit
    FragmentBuffer frags;
    std::vector<Vector2d> pixel_uv;      // interpolated uv (albedo mode)
    std::vector<Vector3d> pixel_normal;  // interpolated, unnormalized (normal mode)

    Points vertices;
    Faces faces;
    Points normals;  // normal mode
    UVs uvs;         // albedo mode
    int albedo_width = 0, albedo_height = 0;
    CameraParams camera;

    bool covered(int x, int y) const { return coverage[static_cast<std::size_t>(y) * image.width + x] != 0; }
};

/// Screen-space triangles of a mesh, culled and clipped to the image bounds.
std::vector<ScreenTriangle> project_triangles(const Points& vertices, const Faces& faces, const CameraParams& camera);

/// Projects and rasterizes a mesh. Triangles with a vertex closer than the near
/// plane (or behind the camera) are dropped rather than clipped.
FragmentBuffer rasterize_mesh(const Points& vertices, const Faces& faces, const CameraParams& camera);

/// Normal image: interpolated world normal, renormalized, encoded as (n + 1) / 2.
/// Background is (0.5, 0.5, 1.0).
RenderOutput render_normal(const Points& vertices, const Faces& faces, const Points& normals, const CameraParams& camera);

/// Unlit albedo image: bilinear, repeat-addressed sample of `albedo` at the
/// interpolated uv. Background is white.
RenderOutput render_albedo(const Points& vertices, const Faces& faces, const UVs& uvs, const Image& albedo,
                           const CameraParams& camera);

/// Bilinear lookup with repeat addressing. v = 0 is the bottom row of the image.
Vector3d sample_bilinear(const Image& texture, const Vector2d& uv);

/// Gradient of a render_albedo image with respect to the albedo texels.
Image backward_albedo(const RenderOutput& output, const Image& pixel_grad);

/// Gradient of a render_normal image with respect to vertex positions, where
/// the normals were produced by vertex_normals(vertices, faces). Flows through
/// the per-pixel normal interpolation (both the attribute and the
/// perspective-correct barycentric weights). Coverage is held fixed.
Points backward_normal(const RenderOutput& output, const Image& pixel_grad);

/// The two pieces of backward_normal before the vertex-normal chain rule.
struct NormalRenderGrad {
    Points normals;    // d/d(per-vertex normal input)
    Points positions;  // d/d(vertex positions) through barycentrics only
};
NormalRenderGrad backward_normal_attributes(const RenderOutput& output, const Image& pixel_grad);

/// Gradient of a render_albedo image with respect to vertex positions, through
/// the barycentric uv interpolation (coverage held fixed).
Points backward_albedo_geometry(const RenderOutput& output, const Image& albedo, const Image& pixel_grad);

/// Reverse mode of the perspective-correct barycentrics of one pixel: upstream
/// gradient on the three weights to gradients on the three world positions.
std::array<Vector3d, 3> barycentric_backward(const CameraFrame& frame, const std::array<Vector3d, 3>& world,
                                             int px, int py, const std::array<double, 3>& grad_bary);

}  // namespace forge
