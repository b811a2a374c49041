#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "forge/body_io.hpp"
#include "forge/body_model.hpp"
#include "test_support.hpp"

using namespace forge;
using forge::testing::make_body;

namespace {

Points one_point(double x, double y, double z) {
    Points p(1, 3);
    p << x, y, z;
    return p;
}

ParametricBody humanoid() { return generate_test_humanoid(8); }

}  // namespace

TEST_CASE("blend_template: zero coefficients and offsets give the template") {
    const ParametricBody body = humanoid();
    const Points out = blend_template(body, BodyCoeffs::zeros(body), Points::Zero(body.num_vertices(), 3));
    CHECK(out == body.template_vertices);
}

TEST_CASE("blend_template: offsets are added per vertex") {
    const ParametricBody body = humanoid();
    Points off = Points::Zero(body.num_vertices(), 3);
    off.col(0).setConstant(0.01);
    const Points out = blend_template(body, BodyCoeffs::zeros(body), off);
    CHECK((out - body.template_vertices - off).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("blend_template: shape coefficients act linearly") {
    const ParametricBody body = humanoid();
    REQUIRE(body.num_shape() >= 1);
    const Points zero = Points::Zero(body.num_vertices(), 3);
    BodyCoeffs c1 = BodyCoeffs::zeros(body), c2 = BodyCoeffs::zeros(body);
    c1.shape[0] = 1.0;
    c2.shape[0] = 2.0;
    const Points d1 = blend_template(body, c1, zero) - body.template_vertices;
    const Points d2 = blend_template(body, c2, zero) - body.template_vertices;
    CHECK((d2 - 2.0 * d1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((d2 - 2.0 * body.shape_basis[0]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("blend_template: superposition over shape, expression and offsets") {
    const ParametricBody body = humanoid();
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    const int n = body.num_vertices();
    auto random_coeffs = [&] {
        BodyCoeffs c = BodyCoeffs::zeros(body);
        for (auto& s : c.shape) s = nd(gen);
        for (auto& e : c.expression) e = nd(gen);
        return c;
    };
    auto random_offsets = [&] {
        Points p(n, 3);
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = 0.01 * nd(gen);
        return p;
    };
    const BodyCoeffs a = random_coeffs(), b = random_coeffs();
    const Points oa = random_offsets(), ob = random_offsets();
    const double wa = 0.7, wb = -1.3;
    BodyCoeffs mix = BodyCoeffs::zeros(body);
    mix.shape = wa * a.shape + wb * b.shape;
    mix.expression = wa * a.expression + wb * b.expression;
    const Points& t = body.template_vertices;
    const Points lhs = blend_template(body, mix, wa * oa + wb * ob) - t;
    const Points rhs = wa * (blend_template(body, a, oa) - t) + wb * (blend_template(body, b, ob) - t);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("blend_template: pose correctives use flattened (R - I) features") {
    const ParametricBody body = humanoid();
    REQUIRE(body.num_pose() == 9 * (body.num_joints() - 1));
    BodyCoeffs c = BodyCoeffs::zeros(body);
    c.pose(2, 0) = 0.4;
    const Eigen::VectorXd feat = pose_features(c.pose);
    Points expected = body.template_vertices;
    for (int k = 0; k < body.num_pose(); ++k) expected += feat[k] * body.pose_basis[static_cast<std::size_t>(k)];
    const Points out = blend_template(body, c, Points::Zero(body.num_vertices(), 3));
    CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-12);
    // Joint 2's block of the features is R - I.
    const Matrix3d r = rodrigues(Vector3d(0.4, 0, 0)) - Matrix3d::Identity();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(feat[9 * 1 + 3 * i + j] == doctest::Approx(r(i, j)).epsilon(1e-14));
}

TEST_CASE("blend_template: dimension mismatches are rejected") {
    const ParametricBody body = humanoid();
    BodyCoeffs c = BodyCoeffs::zeros(body);
    CHECK_THROWS_AS(blend_template(body, c, Points::Zero(3, 3)), std::invalid_argument);
    c.shape = Eigen::VectorXd::Zero(body.num_shape() + 1);
    CHECK_THROWS_AS(blend_template(body, c, Points::Zero(body.num_vertices(), 3)), std::invalid_argument);
}

TEST_CASE("compute_joints: selector, mean and hand-computed rows") {
    Points v(4, 3);
    v << 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 3;
    Faces f(1, 3);
    f << 0, 1, 2;
    ParametricBody body = make_body(v, f, {-1, 0, 1});
    body.skinning_weights = Eigen::MatrixXd::Zero(4, 3);
    body.skinning_weights.col(0).setOnes();
    body.joint_regressor = Eigen::MatrixXd::Zero(3, 4);
    body.joint_regressor(0, 2) = 1.0;                        // selector
    body.joint_regressor.row(1).setConstant(0.25);           // mean
    body.joint_regressor.row(2) << 0.1, 0.2, 0.3, 0.4;       // weighted
    validate(body);
    const Points j = compute_joints(body, v);
    CHECK(Vector3d(j.row(0)).isApprox(Vector3d(0, 2, 0)));
    CHECK((Vector3d(j.row(1)) - Vector3d(0.25, 0.5, 0.75)).norm() < 1e-15);
    // 0.2 * (1,0,0) + 0.3 * (0,2,0) + 0.4 * (0,0,3)
    CHECK((Vector3d(j.row(2)) - Vector3d(0.2, 0.6, 1.2)).norm() < 1e-15);
    CHECK_THROWS_AS(compute_joints(body, Points::Zero(3, 3)), std::invalid_argument);
}

TEST_CASE("rodrigues: 90 degrees about z and the zero rotation") {
    const Matrix3d r = rodrigues(Vector3d(0, 0, std::numbers::pi / 2));
    CHECK((r * Vector3d(1, 0, 0) - Vector3d(0, 1, 0)).norm() < 1e-12);
    CHECK(rodrigues(Vector3d::Zero()) == Matrix3d::Identity());
    const Matrix3d tiny = rodrigues(Vector3d(1e-12, 0, 0));
    CHECK((tiny - Matrix3d::Identity()).norm() < 1e-11);
}

TEST_CASE("linear_blend_skinning: zero pose is the identity") {
    const ParametricBody body = humanoid();
    const Points joints = compute_joints(body, body.template_vertices);
    const Points out =
        linear_blend_skinning(body, body.template_vertices, joints, JointRotations::Zero(body.num_joints(), 3));
    CHECK((out - body.template_vertices).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("linear_blend_skinning: single joint, 90 degrees about z") {
    const Points v = one_point(1, 0, 0);
    ParametricBody body = make_body(v, Faces(0, 3), {-1});
    body.joint_regressor = Eigen::MatrixXd::Zero(1, 1);
    const Points joints = Points::Zero(1, 3);
    JointRotations pose(1, 3);
    pose << 0, 0, std::numbers::pi / 2;
    const Points out = linear_blend_skinning(body, v, joints, pose);
    CHECK((Vector3d(out.row(0)) - Vector3d(0, 1, 0)).norm() < 1e-6);
}

TEST_CASE("linear_blend_skinning: half-weighted vertex lands on the midpoint") {
    // Root at the origin, child at (1, 0, 0) rotated 90 degrees about z.
    Points v(1, 3);
    v << 2, 0, 0;
    ParametricBody body = make_body(v, Faces(0, 3), {-1, 0});
    Points joints(2, 3);
    joints << 0, 0, 0, 1, 0, 0;
    JointRotations pose = JointRotations::Zero(2, 3);
    pose(1, 2) = std::numbers::pi / 2;

    auto skin_with = [&](double w_root) {
        body.skinning_weights.resize(1, 2);
        body.skinning_weights << w_root, 1.0 - w_root;
        return Vector3d(linear_blend_skinning(body, v, joints, pose).row(0));
    };
    const Vector3d root_only = skin_with(1.0);
    const Vector3d child_only = skin_with(0.0);
    CHECK((root_only - Vector3d(2, 0, 0)).norm() < 1e-12);
    CHECK((child_only - Vector3d(1, 1, 0)).norm() < 1e-12);
    CHECK((skin_with(0.5) - 0.5 * (root_only + child_only)).norm() < 1e-12);
}

TEST_CASE("linear_blend_skinning: rigid chains preserve distance to the joint") {
    const ParametricBody body = humanoid();
    const Points joints = compute_joints(body, body.template_vertices);
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    JointRotations pose(body.num_joints(), 3);
    for (Eigen::Index i = 0; i < pose.size(); ++i) pose.data()[i] = u(gen);
    const SkinningTransforms tr = skinning_transforms(body, joints, pose);
    const Points out = linear_blend_skinning(body, body.template_vertices, joints, pose);
    int checked = 0;
    for (int v = 0; v < body.num_vertices(); ++v) {
        Eigen::Index j = 0;
        if (body.skinning_weights.row(v).maxCoeff(&j) < 1.0 - 1e-12) continue;
        const double before = (Vector3d(body.template_vertices.row(v)) - Vector3d(joints.row(j))).norm();
        const double after = (Vector3d(out.row(v)) - Vector3d(tr.posed_joints.row(j))).norm();
        CHECK(std::abs(before - after) < 1e-6);
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("linear_blend_skinning: joints follow the parent chain") {
    Points v = Points::Zero(1, 3);
    ParametricBody body = make_body(v, Faces(0, 3), {-1, 0, 1});
    Points joints(3, 3);
    joints << 0, 0, 0, 1, 0, 0, 2, 0, 0;
    JointRotations pose = JointRotations::Zero(3, 3);
    pose(0, 2) = std::numbers::pi / 2;  // root turns the whole chain
    const SkinningTransforms tr = skinning_transforms(body, joints, pose);
    CHECK((Vector3d(tr.posed_joints.row(1)) - Vector3d(0, 1, 0)).norm() < 1e-12);
    CHECK((Vector3d(tr.posed_joints.row(2)) - Vector3d(0, 2, 0)).norm() < 1e-12);
}

TEST_CASE("skinning_backward is the transpose of skinning") {
    const ParametricBody body = humanoid();
    const Points joints = compute_joints(body, body.template_vertices);
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    JointRotations pose(body.num_joints(), 3);
    for (Eigen::Index i = 0; i < pose.size(); ++i) pose.data()[i] = 0.3 * nd(gen);
    const SkinningTransforms tr = skinning_transforms(body, joints, pose);
    Points dv(body.num_vertices(), 3), g(body.num_vertices(), 3);
    for (Eigen::Index i = 0; i < dv.size(); ++i) {
        dv.data()[i] = nd(gen);
        g.data()[i] = nd(gen);
    }
    const Points base = linear_blend_skinning(body, body.template_vertices, joints, pose);
    const Points moved = linear_blend_skinning(body, body.template_vertices + dv, joints, pose);
    const double lhs = (g.array() * (moved - base).array()).sum();
    const double rhs = (skinning_backward(body, tr, g).array() * dv.array()).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("vertex_normals: flat triangle, cube corners, degenerate fallback") {
    Points tri(3, 3);
    tri << 0, 0, 0, 1, 0, 0, 0, 1, 0;
    Faces f(1, 3);
    f << 0, 1, 2;
    const Points n = vertex_normals(tri, f);
    for (int i = 0; i < 3; ++i) CHECK((Vector3d(n.row(i)) - Vector3d(0, 0, 1)).norm() < 1e-15);

    const auto [cv, cf] = forge::testing::unit_cube();
    const Points cn = vertex_normals(cv, cf);
    for (int i = 0; i < 8; ++i) {
        const Vector3d expected = Vector3d(cv.row(i)).cwiseSign() / std::sqrt(3.0);
        CHECK((Vector3d(cn.row(i)) - expected).norm() < 1e-12);
    }

    Points degenerate(3, 3);
    degenerate << 0, 0, 0, 1, 1, 1, 2, 2, 2;
    const Points dn = vertex_normals(degenerate, f);
    for (int i = 0; i < 3; ++i) CHECK(Vector3d(dn.row(i)) == Vector3d(0, 0, 1));
}

TEST_CASE("vertex_normals: unit length on the humanoid") {
    const ParametricBody body = humanoid();
    const Points n = vertex_normals(body.template_vertices, body.faces);
    for (int v = 0; v < n.rows(); ++v) CHECK(std::abs(n.row(v).norm() - 1.0) < 1e-6);
}

TEST_CASE("vertex_normals_backward matches finite differences") {
    const ParametricBody body = generate_sphere_body(6, 10, 1.0);
    std::mt19937_64 gen(9);
    std::normal_distribution<double> nd;
    Points g(body.num_vertices(), 3);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = nd(gen);
    Points v = body.template_vertices;
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += 0.02 * nd(gen);
    const Points grad = vertex_normals_backward(v, body.faces, g);
    const double h = 1e-6;
    for (int k = 0; k < 30; ++k) {
        const int idx = static_cast<int>(gen() % static_cast<std::uint64_t>(v.size()));
        Points p = v, m = v;
        p.data()[idx] += h;
        m.data()[idx] -= h;
        const double fd = ((vertex_normals(p, body.faces) - vertex_normals(m, body.faces)).array() * g.array()).sum() / (2 * h);
        CHECK(grad.data()[idx] == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
    }
}

TEST_CASE("test humanoid satisfies the body invariants") {
    const ParametricBody body = humanoid();
    CHECK_NOTHROW(validate(body));
    CHECK(body.num_joints() == 17);
    CHECK(body.head_joint() >= 0);
    for (int v = 0; v < body.num_vertices(); ++v)
        CHECK(std::abs(body.skinning_weights.row(v).sum() - 1.0) < 1e-6);
    CHECK((body.uv_coords.array() >= 0.0).all());
    CHECK((body.uv_coords.array() <= 1.0).all());
    CHECK_THROWS_AS(generate_test_humanoid(3), std::invalid_argument);
}

TEST_CASE("body asset: serialize and parse round trip") {
    const ParametricBody body = humanoid();
    const ParametricBody back = parse_body_asset(serialize_body_asset(body));
    CHECK(back == body);
    const auto dir = forge::testing::scratch_dir("body-io");
    save_body_asset(dir / "h.body", body);
    CHECK(load_body_asset(dir / "h.body") == body);
}

TEST_CASE("body asset: invariant violations are reported by name") {
    ParametricBody body = humanoid();
    body.skinning_weights.row(4) *= 0.9;
    const std::string text = serialize_body_asset(body);
    try {
        parse_body_asset(text);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("weights row sum") != std::string::npos);
    }

    ParametricBody cyclic = humanoid();
    cyclic.joint_parents[3] = 5;
    CHECK_THROWS_WITH_AS(validate(cyclic), doctest::Contains("joint parents"), ValidationError);
}

TEST_CASE("body asset: malformed files carry line context") {
    const std::string text = serialize_body_asset(humanoid());
    std::string broken = text;
    const auto pos = broken.find("[faces]");
    REQUIRE(pos != std::string::npos);
    broken.insert(broken.find('\n', pos) + 1, "1 2 banana\n");
    CHECK_THROWS_WITH_AS(parse_body_asset(broken, "x.body"), doctest::Contains("x.body:"), ParseError);
    CHECK_THROWS_AS(parse_body_asset("not-a-body 1\n"), ParseError);
    CHECK_THROWS_AS(load_body_asset("/nonexistent/forge.body"), IoError);
}

TEST_CASE("body asset: full-size skeleton counts load and report") {
    // Same vertex and joint counts as the licensed production body.
    constexpr int kN = 10475, kJ = 54;
    Points v(kN, 3);
    for (int i = 0; i < kN; ++i) v.row(i) << std::cos(i * 0.01), std::sin(i * 0.013), i * 1e-4;
    Faces f(kN - 2, 3);
    for (int i = 0; i < kN - 2; ++i) f.row(i) << i, i + 1, i + 2;
    std::vector<int> parents(kJ);
    for (int j = 0; j < kJ; ++j) parents[static_cast<std::size_t>(j)] = j - 1;
    ParametricBody body = make_body(v, f, parents);
    body.skinning_weights = Eigen::MatrixXd::Zero(kN, kJ);
    for (int i = 0; i < kN; ++i) body.skinning_weights(i, i % kJ) = 1.0;
    body.joint_regressor = Eigen::MatrixXd::Zero(kJ, kN);
    for (int j = 0; j < kJ; ++j) body.joint_regressor(j, j * 100) = 1.0;
    const auto dir = forge::testing::scratch_dir("body-large");
    save_body_asset(dir / "large.body", body);
    const ParametricBody back = load_body_asset(dir / "large.body");
    CHECK(back.num_vertices() == 10475);
    CHECK(back.num_joints() == 54);
}

TEST_CASE("pose library: round trip, lookup and validation") {
    const ParametricBody body = humanoid();
    const PoseLibrary lib = demo_pose_library(body);
    REQUIRE(lib.size() >= 2);
    CHECK(lib.find("canonical") == 0);
    CHECK(lib.find("nope") == -1);
    CHECK(parse_pose_library(serialize_pose_library(lib)) == lib);
    CHECK_NOTHROW(validate(lib, body.num_joints()));
    CHECK_THROWS_AS(validate(lib, body.num_joints() + 1), ValidationError);
    CHECK_THROWS_AS(validate(PoseLibrary{}, body.num_joints()), ValidationError);
    CHECK_THROWS_AS(parse_pose_library("forge-poses 1\njoints 2\nbad 0 0 0\n"), ParseError);
    CHECK_THROWS_AS(parse_pose_library("forge-poses 1\njoints 1\n.. 0 0 0\n"), ValidationError);
}

TEST_CASE("vertex_normals: uv seam copies share one normal") {
    const ParametricBody sphere = generate_sphere_body(8, 12, 1.0);
    const std::vector<int> rep = coincident_representatives(sphere.template_vertices);
    const Points n = vertex_normals(sphere.template_vertices, sphere.faces);
    int copies = 0;
    for (int v = 0; v < sphere.num_vertices(); ++v) {
        const int r = rep[static_cast<std::size_t>(v)];
        CHECK(r <= v);
        if (r == v) continue;
        ++copies;
        CHECK(sphere.template_vertices.row(v) == sphere.template_vertices.row(r));
        CHECK(n.row(v) == n.row(r));
        // On a sphere the smooth normal is the radial direction.
        CHECK((Vector3d(n.row(v)) - Vector3d(sphere.template_vertices.row(v)).normalized()).norm() < 0.1);
    }
    CHECK(copies == 7);  // one per interior ring
}
