#include <random>

#include "doctest.h"
#include "forge/body_io.hpp"
#include "forge/kernels.hpp"
#include "forge/renderer.hpp"

using namespace forge;

namespace {

JointRotations random_pose(int joints, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 0.4);
    JointRotations p(joints, 3);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = nd(gen);
    return p;
}

}  // namespace

TEST_CASE("accumulate_basis: serial and parallel agree bitwise") {
    const ParametricBody body = generate_test_humanoid(12);
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    Eigen::VectorXd coeffs(body.num_pose());
    for (auto& c : coeffs) c = nd(gen);
    Points a = body.template_vertices, b = body.template_vertices;
    kernels::serial::accumulate_basis(a, body.pose_basis, coeffs);
    kernels::omp::accumulate_basis(b, body.pose_basis, coeffs);
    CHECK(a == b);
    CHECK(a != body.template_vertices);
}

TEST_CASE("skin: serial and parallel agree bitwise") {
    const ParametricBody body = generate_test_humanoid(12);
    const Points joints = compute_joints(body, body.template_vertices);
    const SkinningTransforms tr = skinning_transforms(body, joints, random_pose(body.num_joints(), 2));
    Points a(body.num_vertices(), 3), b(body.num_vertices(), 3);
    kernels::serial::skin(body.skinning_weights, tr, body.template_vertices, a);
    kernels::omp::skin(body.skinning_weights, tr, body.template_vertices, b);
    CHECK(a == b);
}

TEST_CASE("rasterize: serial and parallel agree bitwise across views") {
    const ParametricBody body = generate_test_humanoid(12);
    for (double az : {0.0, 37.0, 90.0, 181.0}) {
        CameraParams cam;
        cam.azimuth_deg = az;
        cam.elevation_deg = 10.0;
        cam.distance = 2.8;
        cam.look_at = Vector3d(0, 0.9, 0);
        cam.width = 96;
        cam.height = 80;
        const auto tris = project_triangles(body.template_vertices, body.faces, cam);
        FragmentBuffer a(cam.width, cam.height), b(cam.width, cam.height);
        kernels::serial::rasterize(tris, a);
        kernels::omp::rasterize(tris, b);
        CHECK(a == b);
        int covered = 0;
        for (int id : a.face_id) covered += id >= 0;
        CHECK(covered > 100);
    }
}

TEST_CASE("rasterize: overlapping sheets resolve to the nearer one in both kernels") {
    Points v(6, 3);
    v << -1, -1, 0, 1, -1, 0, 0, 1, 0,       // far sheet, z = 0
        -1, -1, 0.5, 1, -1, 0.5, 0, 1, 0.5;  // near sheet, closer to a +z camera
    Faces f(2, 3);
    f << 3, 4, 5, 0, 1, 2;
    CameraParams cam;
    cam.distance = 4.0;
    cam.width = cam.height = 32;
    const auto tris = project_triangles(v, f, cam);
    FragmentBuffer a(32, 32), b(32, 32);
    kernels::serial::rasterize(tris, a);
    kernels::omp::rasterize(tris, b);
    CHECK(a == b);
    CHECK(a.face_id[16 * 32 + 16] == 0);
}
