#include "forge/body_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "text_util.hpp"

namespace forge {
namespace {

using text::format_double;
using text::LineReader;

constexpr std::string_view kBodyMagic = "forge-body";
constexpr std::string_view kPoseMagic = "forge-poses";
constexpr int kFormatVersion = 1;

[[noreturn]] void parse_fail(const LineReader& r, const std::string& what) { throw ParseError(r.where() + ": " + what); }

std::vector<std::string_view> expect_fields(LineReader& r, std::size_t count, const std::string& context) {
    std::string_view line;
    if (!r.next(line)) parse_fail(r, "unexpected end of file in " + context);
    if (!line.empty() && line.front() == '[') parse_fail(r, "section ended early in " + context);
    auto fields = text::split_ws(line);
    if (fields.size() != count) {
        std::ostringstream os;
        os << context << ": expected " << count << " fields, found " << fields.size();
        parse_fail(r, os.str());
    }
    return fields;
}

double field_double(const LineReader& r, std::string_view f, const std::string& context, std::size_t index) {
    double v;
    if (!text::parse_double(f, v)) {
        std::ostringstream os;
        os << context << ": field " << index << " '" << f << "' is not a number";
        parse_fail(r, os.str());
    }
    return v;
}

int field_int(const LineReader& r, std::string_view f, const std::string& context, std::size_t index) {
    int v;
    if (!text::parse_int(f, v)) {
        std::ostringstream os;
        os << context << ": field " << index << " '" << f << "' is not an integer";
        parse_fail(r, os.str());
    }
    return v;
}

void expect_section(LineReader& r, std::string_view name) {
    std::string_view line;
    if (!r.next(line)) parse_fail(r, "unexpected end of file, expected [" + std::string(name) + "]");
    if (line != "[" + std::string(name) + "]")
        parse_fail(r, "expected section [" + std::string(name) + "], found '" + std::string(line) + "'");
}

Points read_points(LineReader& r, int rows, const std::string& context) {
    Points p(rows, 3);
    for (int i = 0; i < rows; ++i) {
        auto f = expect_fields(r, 3, context);
        for (int k = 0; k < 3; ++k) p(i, k) = field_double(r, f[k], context, k);
    }
    return p;
}

void write_points(std::ostringstream& os, const Points& p) {
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        os << format_double(p(i, 0)) << ' ' << format_double(p(i, 1)) << ' ' << format_double(p(i, 2)) << '\n';
}

void check_magic(LineReader& r, std::string_view magic) {
    std::string_view line;
    if (!r.next(line)) parse_fail(r, "empty file");
    auto f = text::split_ws(line);
    if (f.size() != 2 || f[0] != magic) parse_fail(r, "missing '" + std::string(magic) + " <version>' header");
    int version;
    if (!text::parse_int(f[1], version) || version != kFormatVersion)
        parse_fail(r, "unsupported format version '" + std::string(f[1]) + "'");
}

int read_count(LineReader& r, std::string_view key) {
    auto f = expect_fields(r, 2, "header");
    if (f[0] != key) parse_fail(r, "expected header key '" + std::string(key) + "', found '" + std::string(f[0]) + "'");
    const int v = field_int(r, f[1], "header " + std::string(key), 1);
    if (v < 0) parse_fail(r, "header " + std::string(key) + " must be non-negative");
    return v;
}

}  // namespace

int PoseLibrary::find(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<int>(i);
    return -1;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open file");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open file for writing");
    out << content;
    if (!out) throw IoError(path.string() + ": write failed");
}

ParametricBody parse_body_asset(const std::string& content, const std::string& source) {
    LineReader r(content, source);
    check_magic(r, kBodyMagic);
    const int n = read_count(r, "vertices");
    const int nf = read_count(r, "faces");
    const int nj = read_count(r, "joints");
    const int ns = read_count(r, "shape");
    const int np = read_count(r, "pose");
    const int ne = read_count(r, "expression");

    ParametricBody body;
    expect_section(r, "template_vertices");
    body.template_vertices = read_points(r, n, "template_vertices");

    expect_section(r, "faces");
    body.faces.resize(nf, 3);
    for (int i = 0; i < nf; ++i) {
        auto f = expect_fields(r, 3, "faces");
        for (int k = 0; k < 3; ++k) body.faces(i, k) = field_int(r, f[k], "faces", k);
    }

    expect_section(r, "uv_coords");
    body.uv_coords.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        auto f = expect_fields(r, 2, "uv_coords");
        for (int k = 0; k < 2; ++k) body.uv_coords(i, k) = field_double(r, f[k], "uv_coords", k);
    }

    const auto read_basis = [&](const char* name, int count, std::vector<Points>& out) {
        expect_section(r, name);
        out.reserve(static_cast<std::size_t>(count));
        for (int c = 0; c < count; ++c) out.push_back(read_points(r, n, name));
    };
    read_basis("shape_basis", ns, body.shape_basis);
    read_basis("pose_basis", np, body.pose_basis);
    read_basis("expr_basis", ne, body.expr_basis);

    expect_section(r, "joint_regressor");
    body.joint_regressor.resize(nj, n);
    for (int j = 0; j < nj; ++j) {
        auto f = expect_fields(r, static_cast<std::size_t>(n), "joint_regressor");
        for (int i = 0; i < n; ++i) body.joint_regressor(j, i) = field_double(r, f[i], "joint_regressor", i);
    }

    expect_section(r, "skinning_weights");
    body.skinning_weights.resize(n, nj);
    for (int i = 0; i < n; ++i) {
        auto f = expect_fields(r, static_cast<std::size_t>(nj), "skinning_weights");
        for (int j = 0; j < nj; ++j) body.skinning_weights(i, j) = field_double(r, f[j], "skinning_weights", j);
    }

    expect_section(r, "joint_parents");
    body.joint_parents.resize(static_cast<std::size_t>(nj));
    for (int j = 0; j < nj; ++j) {
        auto f = expect_fields(r, 1, "joint_parents");
        body.joint_parents[static_cast<std::size_t>(j)] = field_int(r, f[0], "joint_parents", 0);
    }

    std::string_view line;
    if (r.next(line)) {
        if (line != "[joint_names]") parse_fail(r, "unexpected content '" + std::string(line) + "'");
        for (int j = 0; j < nj; ++j) {
            auto f = expect_fields(r, 1, "joint_names");
            body.joint_names.emplace_back(f[0]);
        }
        if (r.next(line)) parse_fail(r, "unexpected trailing content");
    }

    validate(body);
    return body;
}

ParametricBody load_body_asset(const std::filesystem::path& path) {
    return parse_body_asset(read_text_file(path), path.string());
}

std::string serialize_body_asset(const ParametricBody& body) {
    std::ostringstream os;
    os << kBodyMagic << ' ' << kFormatVersion << '\n';
    os << "vertices " << body.num_vertices() << '\n'
       << "faces " << body.num_faces() << '\n'
       << "joints " << body.num_joints() << '\n'
       << "shape " << body.num_shape() << '\n'
       << "pose " << body.num_pose() << '\n'
       << "expression " << body.num_expression() << '\n';
    os << "[template_vertices]\n";
    write_points(os, body.template_vertices);
    os << "[faces]\n";
    for (Eigen::Index f = 0; f < body.faces.rows(); ++f)
        os << body.faces(f, 0) << ' ' << body.faces(f, 1) << ' ' << body.faces(f, 2) << '\n';
    os << "[uv_coords]\n";
    for (Eigen::Index i = 0; i < body.uv_coords.rows(); ++i)
        os << format_double(body.uv_coords(i, 0)) << ' ' << format_double(body.uv_coords(i, 1)) << '\n';
    os << "[shape_basis]\n";
    for (const auto& b : body.shape_basis) write_points(os, b);
    os << "[pose_basis]\n";
    for (const auto& b : body.pose_basis) write_points(os, b);
    os << "[expr_basis]\n";
    for (const auto& b : body.expr_basis) write_points(os, b);
    os << "[joint_regressor]\n";
    for (Eigen::Index j = 0; j < body.joint_regressor.rows(); ++j) {
        for (Eigen::Index i = 0; i < body.joint_regressor.cols(); ++i)
            os << (i ? " " : "") << format_double(body.joint_regressor(j, i));
        os << '\n';
    }
    os << "[skinning_weights]\n";
    for (Eigen::Index i = 0; i < body.skinning_weights.rows(); ++i) {
        for (Eigen::Index j = 0; j < body.skinning_weights.cols(); ++j)
            os << (j ? " " : "") << format_double(body.skinning_weights(i, j));
        os << '\n';
    }
    os << "[joint_parents]\n";
    for (int p : body.joint_parents) os << p << '\n';
    if (!body.joint_names.empty()) {
        os << "[joint_names]\n";
        for (const auto& name : body.joint_names) os << name << '\n';
    }
    return os.str();
}

void save_body_asset(const std::filesystem::path& path, const ParametricBody& body) {
    write_text_file(path, serialize_body_asset(body));
}

void validate(const PoseLibrary& poses, int num_joints) {
    if (poses.poses.empty()) throw ValidationError("invalid pose library: no poses");
    if (poses.labels.size() != poses.poses.size()) throw ValidationError("invalid pose library: label count mismatch");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < poses.poses.size(); ++i) {
        const auto& label = poses.labels[i];
        if (label.empty() || label == "." || label == ".." || label.find_first_of(" \t\r\n/\\") != std::string::npos)
            throw ValidationError("invalid pose library: malformed label at entry " + std::to_string(i));
        if (!seen.insert(label).second) throw ValidationError("invalid pose library: duplicate label '" + label + "'");
        if (poses.poses[i].rows() != num_joints)
            throw ValidationError("invalid pose library: pose '" + label + "' has " +
                                  std::to_string(poses.poses[i].rows()) + " joints, body has " +
                                  std::to_string(num_joints));
        if (!poses.poses[i].allFinite())
            throw ValidationError("invalid pose library: pose '" + label + "' is not finite");
    }
}

PoseLibrary parse_pose_library(const std::string& content, const std::string& source) {
    LineReader r(content, source);
    check_magic(r, kPoseMagic);
    const int nj = read_count(r, "joints");
    PoseLibrary lib;
    std::string_view line;
    while (r.next(line)) {
        auto f = text::split_ws(line);
        if (f.size() != static_cast<std::size_t>(1 + 3 * nj)) {
            std::ostringstream os;
            os << "pose record: expected label plus " << 3 * nj << " values, found " << f.size() << " fields";
            parse_fail(r, os.str());
        }
        JointRotations pose(nj, 3);
        for (int i = 0; i < 3 * nj; ++i)
            pose(i / 3, i % 3) = field_double(r, f[static_cast<std::size_t>(i + 1)], "pose '" + std::string(f[0]) + "'", i + 1);
        lib.labels.emplace_back(f[0]);
        lib.poses.push_back(std::move(pose));
    }
    validate(lib, nj);
    return lib;
}

PoseLibrary load_pose_library(const std::filesystem::path& path) {
    return parse_pose_library(read_text_file(path), path.string());
}

std::string serialize_pose_library(const PoseLibrary& poses) {
    std::ostringstream os;
    const int nj = poses.poses.empty() ? 0 : static_cast<int>(poses.poses.front().rows());
    os << kPoseMagic << ' ' << kFormatVersion << '\n' << "joints " << nj << '\n';
    for (std::size_t i = 0; i < poses.poses.size(); ++i) {
        os << poses.labels[i];
        for (Eigen::Index j = 0; j < poses.poses[i].rows(); ++j)
            for (int k = 0; k < 3; ++k) os << ' ' << format_double(poses.poses[i](j, k));
        os << '\n';
    }
    return os.str();
}

void save_pose_library(const std::filesystem::path& path, const PoseLibrary& poses) {
    write_text_file(path, serialize_pose_library(poses));
}

// ---------------------------------------------------------------------------
// Procedural assets

namespace {

struct JointDef {
    const char* name;
    int parent;
};

// Skeleton of the test humanoid. Left is +x, the body faces +z, y is up.
constexpr JointDef kHumanoidJoints[] = {
    {"pelvis", -1},     {"spine", 0},       {"chest", 1},       {"neck", 2},        {"head", 3},
    {"l_shoulder", 2},  {"l_elbow", 5},     {"l_wrist", 6},     {"r_shoulder", 2},  {"r_elbow", 8},
    {"r_wrist", 9},     {"l_hip", 0},       {"l_knee", 11},     {"l_ankle", 12},    {"r_hip", 0},
    {"r_knee", 14},     {"r_ankle", 15},
};
constexpr int kHumanoidJointCount = 17;

struct CapsuleDef {
    Vector3d start;
    Vector3d end;
    double radius;
    std::vector<int> chain;         // joints along the capsule, root-most first
    std::vector<double> chain_axial;  // axial position of each chain joint
};

struct MeshBuilder {
    std::vector<Vector3d> positions;
    std::vector<Vector2d> uvs;
    std::vector<std::array<int, 3>> faces;
    std::vector<std::vector<std::pair<int, double>>> weights;  // sparse (joint, w)
    std::vector<Vector3d> radial;                               // outward direction from axis
    std::vector<int> capsule_of;
    // joint -> vertices of the ring that regresses it
    std::map<int, std::vector<int>> regressor_rings;
};

std::vector<std::pair<int, double>> chain_weights(const CapsuleDef& cap, double x) {
    const auto& a = cap.chain_axial;
    const std::size_t k = cap.chain.size();
    if (k == 1 || x <= a.front()) return {{cap.chain.front(), 1.0}};
    double min_seg = 1e30;
    for (std::size_t i = 0; i + 1 < k; ++i) min_seg = std::min(min_seg, a[i + 1] - a[i]);
    const double half = 0.25 * min_seg;
    for (std::size_t i = 1; i < k; ++i) {
        if (x < a[i] - half) return {{cap.chain[i - 1], 1.0}};
        if (x <= a[i] + half) {
            const double t = (x - (a[i] - half)) / (2.0 * half);
            if (t <= 0.0) return {{cap.chain[i - 1], 1.0}};
            if (t >= 1.0) return {{cap.chain[i], 1.0}};
            return {{cap.chain[i - 1], 1.0 - t}, {cap.chain[i], t}};
        }
    }
    return {{cap.chain.back(), 1.0}};
}

void add_capsule(MeshBuilder& mb, const CapsuleDef& cap, int capsule_index, int around, const Eigen::Vector4d& tile) {
    const Vector3d axis_vec = cap.end - cap.start;
    const double length = axis_vec.norm();
    const Vector3d axis = axis_vec / length;
    // Seam at the back of the body.
    Vector3d e1 = Vector3d(0.0, 0.0, -1.0);
    e1 = (e1 - axis * axis.dot(e1)).normalized();
    const Vector3d e2 = axis.cross(e1).normalized();
    const double r = cap.radius;

    const int cap_rings = std::max(2, around / 4);
    const double facet = 2.0 * std::numbers::pi * r / around;
    const int body_rings = std::max(2, static_cast<int>(std::ceil(length / (2.0 * facet))));

    struct Ring {
        double axial;
        double radius;
    };
    std::vector<Ring> rings;
    for (int k = 1; k < cap_rings; ++k) {
        const double th = 0.5 * std::numbers::pi * (1.0 - static_cast<double>(k) / cap_rings);
        rings.push_back({-r * std::sin(th), r * std::cos(th)});
    }
    for (int m = 0; m <= body_rings; ++m) rings.push_back({length * m / body_rings, r});
    for (int k = cap_rings - 1; k >= 1; --k) {
        const double th = 0.5 * std::numbers::pi * (1.0 - static_cast<double>(k) / cap_rings);
        rings.push_back({length + r * std::sin(th), r * std::cos(th)});
    }

    const double total = length + 2.0 * r;
    const auto uv_at = [&](double u01, double axial) {
        const double v01 = (axial + r) / total;
        return Vector2d(tile[0] + (tile[2] - tile[0]) * u01, tile[1] + (tile[3] - tile[1]) * v01);
    };
    const auto add_vertex = [&](const Vector3d& p, const Vector2d& uv, double axial, const Vector3d& radial) {
        mb.positions.push_back(p);
        mb.uvs.push_back(uv);
        mb.weights.push_back(chain_weights(cap, axial));
        mb.radial.push_back(radial);
        mb.capsule_of.push_back(capsule_index);
        return static_cast<int>(mb.positions.size()) - 1;
    };

    const int start_tip = add_vertex(cap.start - axis * r, uv_at(0.5, -r), -r, -axis);
    std::vector<int> ring_start;
    for (const auto& ring : rings) {
        ring_start.push_back(static_cast<int>(mb.positions.size()));
        for (int j = 0; j <= around; ++j) {
            const double phi = 2.0 * std::numbers::pi * (j % around) / around;  // seam copy is bitwise equal
            const Vector3d dir = std::cos(phi) * e1 + std::sin(phi) * e2;
            add_vertex(cap.start + axis * ring.axial + dir * ring.radius, uv_at(static_cast<double>(j) / around, ring.axial),
                       ring.axial, dir);
        }
    }
    const int end_tip = add_vertex(cap.end + axis * r, uv_at(0.5, length + r), length + r, axis);

    // Winding: with e2 = axis x e1 the ring runs counter-clockwise seen from the
    // +axis end, so (ring k, j) -> (ring k+1, j) -> (ring k, j+1) faces outward.
    std::vector<std::array<int, 3>> faces;
    for (int j = 0; j < around; ++j) faces.push_back({start_tip, ring_start.front() + j + 1, ring_start.front() + j});
    for (std::size_t k = 0; k + 1 < rings.size(); ++k) {
        for (int j = 0; j < around; ++j) {
            const int a = ring_start[k] + j, b = ring_start[k] + j + 1;
            const int c = ring_start[k + 1] + j, d = ring_start[k + 1] + j + 1;
            faces.push_back({a, b, d});
            faces.push_back({a, d, c});
        }
    }
    for (int j = 0; j < around; ++j) faces.push_back({end_tip, ring_start.back() + j, ring_start.back() + j + 1});

    // Orient outward: compare the first side face normal with its radial direction.
    {
        const auto& f = faces[static_cast<std::size_t>(around)];
        const Vector3d n = (mb.positions[f[1]] - mb.positions[f[0]]).cross(mb.positions[f[2]] - mb.positions[f[0]]);
        if (n.dot(mb.radial[f[0]]) < 0.0)
            for (auto& tri : faces) std::swap(tri[1], tri[2]);
    }
    mb.faces.insert(mb.faces.end(), faces.begin(), faces.end());

    // Regressor rings: the ring nearest to each chain joint.
    for (std::size_t c = 0; c < cap.chain.size(); ++c) {
        const int joint = cap.chain[c];
        if (mb.regressor_rings.count(joint)) continue;
        std::size_t best = 0;
        for (std::size_t k = 1; k < rings.size(); ++k)
            if (std::abs(rings[k].axial - cap.chain_axial[c]) < std::abs(rings[best].axial - cap.chain_axial[c])) best = k;
        std::vector<int> verts;
        for (int j = 0; j < around; ++j) verts.push_back(ring_start[best] + j);  // skip the seam duplicate
        mb.regressor_rings[joint] = verts;
    }
}

Points to_points(const std::vector<Vector3d>& v) {
    Points p(static_cast<Eigen::Index>(v.size()), 3);
    for (std::size_t i = 0; i < v.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
    return p;
}

}  // namespace

ParametricBody generate_test_humanoid(int n_segments) {
    if (n_segments < 4) throw std::invalid_argument("generate_test_humanoid: n_segments must be >= 4");

    const double torso_bottom = 0.92, torso_top = 1.50;
    const double shoulder_x = 0.17, shoulder_y = 1.42;
    const double hip_x = 0.10;
    std::vector<CapsuleDef> caps;
    caps.push_back({{0, torso_bottom, 0}, {0, torso_top, 0}, 0.14, {0, 1, 2}, {0.0, 0.2, 0.4}});
    caps.push_back({{0, torso_top, 0}, {0, 1.72, 0}, 0.10, {3, 4}, {0.0, 0.1}});
    for (int side = 0; side < 2; ++side) {
        const double s = side == 0 ? 1.0 : -1.0;
        const int base = side == 0 ? 5 : 8;
        caps.push_back({{s * shoulder_x, shoulder_y, 0}, {s * 0.80, shoulder_y, 0}, 0.045,
                        {base, base + 1, base + 2}, {0.0, 0.28, 0.53}});
    }
    for (int side = 0; side < 2; ++side) {
        const double s = side == 0 ? 1.0 : -1.0;
        const int base = side == 0 ? 11 : 14;
        caps.push_back({{s * hip_x, torso_bottom, 0}, {s * hip_x, 0.05, 0}, 0.065, {base, base + 1, base + 2},
                        {0.0, 0.42, 0.82}});
    }

    MeshBuilder mb;
    constexpr double kMargin = 0.01;
    for (std::size_t c = 0; c < caps.size(); ++c) {
        const double col = static_cast<double>(c % 4), row = static_cast<double>(c / 4);
        const Eigen::Vector4d tile(col / 4.0 + kMargin, row / 2.0 + kMargin, (col + 1.0) / 4.0 - kMargin,
                                   (row + 1.0) / 2.0 - kMargin);
        add_capsule(mb, caps[c], static_cast<int>(c), n_segments, tile);
    }

    ParametricBody body;
    const auto n = static_cast<Eigen::Index>(mb.positions.size());
    body.template_vertices = to_points(mb.positions);
    body.faces.resize(static_cast<Eigen::Index>(mb.faces.size()), 3);
    for (std::size_t f = 0; f < mb.faces.size(); ++f)
        for (int k = 0; k < 3; ++k) body.faces(static_cast<Eigen::Index>(f), k) = mb.faces[f][static_cast<std::size_t>(k)];
    body.uv_coords.resize(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) body.uv_coords.row(i) = mb.uvs[static_cast<std::size_t>(i)].transpose();

    body.joint_parents.resize(kHumanoidJointCount);
    for (int j = 0; j < kHumanoidJointCount; ++j) {
        body.joint_parents[static_cast<std::size_t>(j)] = kHumanoidJoints[j].parent;
        body.joint_names.emplace_back(kHumanoidJoints[j].name);
    }

    body.skinning_weights = Eigen::MatrixXd::Zero(n, kHumanoidJointCount);
    for (Eigen::Index i = 0; i < n; ++i)
        for (auto [j, w] : mb.weights[static_cast<std::size_t>(i)]) body.skinning_weights(i, j) += w;

    body.joint_regressor = Eigen::MatrixXd::Zero(kHumanoidJointCount, n);
    for (const auto& [joint, verts] : mb.regressor_rings)
        for (int v : verts) body.joint_regressor(joint, v) = 1.0 / static_cast<double>(verts.size());

    // Shape: girth (radial) and height (vertical stretch about the pelvis).
    Points girth(n, 3), height(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        girth.row(i) = 0.02 * mb.radial[static_cast<std::size_t>(i)].transpose();
        height.row(i) << 0.0, 0.05 * (body.template_vertices(i, 1) - torso_bottom), 0.0;
    }
    body.shape_basis = {girth, height};

    // Expression: head inflation weighted by head skinning.
    Points expr(n, 3);
    for (Eigen::Index i = 0; i < n; ++i)
        expr.row(i) = 0.01 * body.skinning_weights(i, 4) * mb.radial[static_cast<std::size_t>(i)].transpose();
    body.expr_basis = {expr};

    // Pose correctives: diagonal (R - I) entries of each joint bulge the vertices
    // it drives.
    body.pose_basis.assign(static_cast<std::size_t>(9 * (kHumanoidJointCount - 1)), Points::Zero(n, 3));
    for (int j = 1; j < kHumanoidJointCount; ++j)
        for (int e : {0, 4, 8}) {
            Points& comp = body.pose_basis[static_cast<std::size_t>(9 * (j - 1) + e)];
            for (Eigen::Index i = 0; i < n; ++i)
                comp.row(i) = -0.01 * body.skinning_weights(i, j) * mb.radial[static_cast<std::size_t>(i)].transpose();
        }

    validate(body);
    return body;
}

ParametricBody generate_sphere_body(int rings, int segments, double radius) {
    if (rings < 2 || segments < 3) throw std::invalid_argument("generate_sphere_body: need rings >= 2, segments >= 3");
    std::vector<Vector3d> pos;
    std::vector<Vector2d> uv;
    pos.emplace_back(0.0, -radius, 0.0);
    uv.emplace_back(0.5, 0.0);
    for (int i = 1; i < rings; ++i) {
        const double lat = -0.5 * std::numbers::pi + std::numbers::pi * i / rings;
        for (int j = 0; j <= segments; ++j) {
            const double lon = 2.0 * std::numbers::pi * (j % segments) / segments;
            pos.emplace_back(radius * std::cos(lat) * std::sin(lon), radius * std::sin(lat), radius * std::cos(lat) * std::cos(lon));
            uv.emplace_back(static_cast<double>(j) / segments, static_cast<double>(i) / rings);
        }
    }
    pos.emplace_back(0.0, radius, 0.0);
    uv.emplace_back(0.5, 1.0);
    const int top = static_cast<int>(pos.size()) - 1;
    const auto ring_vertex = [segments](int ring, int j) { return 1 + (ring - 1) * (segments + 1) + j; };

    std::vector<std::array<int, 3>> faces;
    for (int j = 0; j < segments; ++j) faces.push_back({0, ring_vertex(1, j + 1), ring_vertex(1, j)});
    for (int i = 1; i + 1 < rings; ++i)
        for (int j = 0; j < segments; ++j) {
            const int a = ring_vertex(i, j), b = ring_vertex(i, j + 1);
            const int c = ring_vertex(i + 1, j), d = ring_vertex(i + 1, j + 1);
            faces.push_back({a, b, d});
            faces.push_back({a, d, c});
        }
    for (int j = 0; j < segments; ++j) faces.push_back({top, ring_vertex(rings - 1, j), ring_vertex(rings - 1, j + 1)});
    {
        const auto& f = faces[static_cast<std::size_t>(segments)];
        const Vector3d n = (pos[f[1]] - pos[f[0]]).cross(pos[f[2]] - pos[f[0]]);
        if (n.dot(pos[f[0]]) < 0.0)
            for (auto& tri : faces) std::swap(tri[1], tri[2]);
    }

    ParametricBody body;
    const auto n = static_cast<Eigen::Index>(pos.size());
    body.template_vertices = to_points(pos);
    body.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f)
        for (int k = 0; k < 3; ++k) body.faces(static_cast<Eigen::Index>(f), k) = faces[f][static_cast<std::size_t>(k)];
    body.uv_coords.resize(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) body.uv_coords.row(i) = uv[static_cast<std::size_t>(i)].transpose();
    body.joint_parents = {-1};
    body.joint_regressor = Eigen::MatrixXd::Constant(1, n, 1.0 / static_cast<double>(n));
    body.skinning_weights = Eigen::MatrixXd::Ones(n, 1);
    validate(body);
    return body;
}

PoseLibrary demo_pose_library(const ParametricBody& humanoid) {
    const auto joint = [&](const std::string& name) {
        for (std::size_t j = 0; j < humanoid.joint_names.size(); ++j)
            if (humanoid.joint_names[j] == name) return static_cast<Eigen::Index>(j);
        throw std::invalid_argument("demo_pose_library: body has no joint '" + name + "'");
    };
    const auto zero = JointRotations::Zero(humanoid.num_joints(), 3).eval();
    PoseLibrary lib;

    lib.labels.push_back("canonical");
    lib.poses.push_back(zero);

    JointRotations arms_down = zero;
    arms_down.row(joint("l_shoulder")) << 0.0, 0.0, -1.2;
    arms_down.row(joint("r_shoulder")) << 0.0, 0.0, 1.2;
    lib.labels.push_back("arms_down");
    lib.poses.push_back(arms_down);

    JointRotations stride = zero;
    stride.row(joint("l_hip")) << -0.45, 0.0, 0.0;
    stride.row(joint("l_knee")) << 0.5, 0.0, 0.0;
    stride.row(joint("r_hip")) << 0.35, 0.0, 0.0;
    stride.row(joint("l_shoulder")) << 0.0, 0.3, -1.1;
    stride.row(joint("r_shoulder")) << 0.0, 0.3, 1.1;
    lib.labels.push_back("stride");
    lib.poses.push_back(stride);

    JointRotations reach = zero;
    reach.row(joint("spine")) << 0.15, 0.2, 0.0;
    reach.row(joint("r_shoulder")) << 0.0, -0.6, 0.4;
    reach.row(joint("r_elbow")) << 0.0, -0.9, 0.0;
    reach.row(joint("head")) << -0.2, 0.3, 0.0;
    lib.labels.push_back("reach");
    lib.poses.push_back(reach);
    return lib;
}

}  // namespace forge
