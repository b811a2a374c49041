#include "forge/body_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "forge/kernels.hpp"

namespace forge {
namespace {

constexpr double kRowSumTolerance = 1e-6;
constexpr double kNormalEpsilon = 1e-30;

[[noreturn]] void invalid(const std::string& what) { throw ValidationError("invalid body: " + what); }

void check_basis(const std::vector<Points>& basis, int n, const char* name) {
    for (std::size_t k = 0; k < basis.size(); ++k) {
        if (basis[k].rows() != n) {
            std::ostringstream os;
            os << name << " component " << k << " has " << basis[k].rows() << " rows, expected " << n;
            invalid(os.str());
        }
        if (!basis[k].allFinite()) invalid(std::string(name) + " contains non-finite values");
    }
}

void check_dims(const ParametricBody& body, const BodyCoeffs& coeffs, const Points& offsets) {
    const int n = body.num_vertices();
    if (coeffs.shape.size() != body.num_shape())
        throw std::invalid_argument("blend_template: shape coefficient count does not match shape basis");
    if (coeffs.expression.size() != body.num_expression())
        throw std::invalid_argument("blend_template: expression coefficient count does not match expression basis");
    if (coeffs.pose.rows() != body.num_joints())
        throw std::invalid_argument("blend_template: pose must have one axis-angle per joint");
    if (offsets.rows() != n) throw std::invalid_argument("blend_template: offsets must have one row per vertex");
}

}  // namespace

int ParametricBody::head_joint() const {
    for (std::size_t j = 0; j < joint_names.size(); ++j)
        if (joint_names[j] == "head") return static_cast<int>(j);
    const Points joints = compute_joints(*this, template_vertices);
    int best = 0;
    for (int j = 1; j < num_joints(); ++j)
        if (joints(j, 1) > joints(best, 1)) best = j;
    return best;
}

bool ParametricBody::operator==(const ParametricBody& o) const {
    return template_vertices == o.template_vertices && faces == o.faces && uv_coords == o.uv_coords &&
           shape_basis == o.shape_basis && pose_basis == o.pose_basis && expr_basis == o.expr_basis &&
           joint_regressor == o.joint_regressor && skinning_weights == o.skinning_weights &&
           joint_parents == o.joint_parents && joint_names == o.joint_names;
}

void validate(const ParametricBody& body) {
    const int n = body.num_vertices();
    const int j = body.num_joints();
    if (n == 0) invalid("no vertices");
    if (j == 0) invalid("no joints");
    if (!body.template_vertices.allFinite()) invalid("template vertices contain non-finite values");

    for (Eigen::Index f = 0; f < body.faces.rows(); ++f)
        for (int k = 0; k < 3; ++k)
            if (body.faces(f, k) < 0 || body.faces(f, k) >= n) {
                std::ostringstream os;
                os << "face index out of range at face " << f;
                invalid(os.str());
            }

    if (body.uv_coords.rows() != n) invalid("uv count does not match vertex count");
    for (Eigen::Index v = 0; v < n; ++v)
        for (int k = 0; k < 2; ++k)
            if (!(body.uv_coords(v, k) >= 0.0 && body.uv_coords(v, k) <= 1.0)) {
                std::ostringstream os;
                os << "uv range violated at vertex " << v;
                invalid(os.str());
            }

    check_basis(body.shape_basis, n, "shape basis");
    check_basis(body.pose_basis, n, "pose basis");
    check_basis(body.expr_basis, n, "expression basis");
    if (!body.pose_basis.empty() && body.num_pose() != 9 * (j - 1)) invalid("pose basis must have 9 * (J - 1) components");

    int roots = 0;
    for (int i = 0; i < j; ++i) {
        const int p = body.joint_parents[static_cast<std::size_t>(i)];
        if (p == -1) {
            ++roots;
        } else if (p < 0 || p >= i) {
            std::ostringstream os;
            os << "joint parents order violated at joint " << i << " (parent " << p << ")";
            invalid(os.str());
        }
    }
    if (roots != 1) invalid("joint parents must form a single tree");
    if (!body.joint_names.empty() && static_cast<int>(body.joint_names.size()) != j)
        invalid("joint name count does not match joint count");

    if (body.joint_regressor.rows() != j || body.joint_regressor.cols() != n) invalid("joint regressor must be J x N");
    for (int r = 0; r < j; ++r) {
        if ((body.joint_regressor.row(r).array() < 0.0).any() || !body.joint_regressor.row(r).allFinite()) {
            std::ostringstream os;
            os << "regressor entries must be non-negative (row " << r << ")";
            invalid(os.str());
        }
        const double s = body.joint_regressor.row(r).sum();
        if (std::abs(s - 1.0) > kRowSumTolerance) {
            std::ostringstream os;
            os << "regressor row sum " << s << " != 1 at joint " << r;
            invalid(os.str());
        }
    }

    if (body.skinning_weights.rows() != n || body.skinning_weights.cols() != j) invalid("skinning weights must be N x J");
    for (int v = 0; v < n; ++v) {
        if ((body.skinning_weights.row(v).array() < 0.0).any() || !body.skinning_weights.row(v).allFinite()) {
            std::ostringstream os;
            os << "weights must be non-negative (vertex " << v << ")";
            invalid(os.str());
        }
        const double s = body.skinning_weights.row(v).sum();
        if (std::abs(s - 1.0) > kRowSumTolerance) {
            std::ostringstream os;
            os << "weights row sum " << s << " != 1 at vertex " << v;
            invalid(os.str());
        }
    }
}

BodyCoeffs BodyCoeffs::zeros(const ParametricBody& body) {
    BodyCoeffs c;
    c.shape = Eigen::VectorXd::Zero(body.num_shape());
    c.pose = JointRotations::Zero(body.num_joints(), 3);
    c.expression = Eigen::VectorXd::Zero(body.num_expression());
    return c;
}

Matrix3d rodrigues(const Vector3d& axis_angle) {
    const double theta = axis_angle.norm();
    if (theta == 0.0) return Matrix3d::Identity();
    Matrix3d k;
    k << 0.0, -axis_angle.z(), axis_angle.y(),
         axis_angle.z(), 0.0, -axis_angle.x(),
        -axis_angle.y(), axis_angle.x(), 0.0;
    double a, b;
    if (theta < 1e-6) {
        // Taylor terms of sin(t)/t and (1 - cos t)/t^2.
        a = 1.0 - theta * theta / 6.0;
        b = 0.5 - theta * theta / 24.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / (theta * theta);
    }
    return Matrix3d::Identity() + a * k + b * k * k;
}

Eigen::VectorXd pose_features(const JointRotations& pose) {
    const Eigen::Index j = pose.rows();
    Eigen::VectorXd feat = Eigen::VectorXd::Zero(j > 0 ? 9 * (j - 1) : 0);
    for (Eigen::Index i = 1; i < j; ++i) {
        const Matrix3d r = rodrigues(pose.row(i).transpose()) - Matrix3d::Identity();
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) feat[9 * (i - 1) + 3 * a + b] = r(a, b);
    }
    return feat;
}

Points shape_vertices(const ParametricBody& body, const BodyCoeffs& coeffs) {
    if (coeffs.shape.size() != body.num_shape() || coeffs.expression.size() != body.num_expression())
        throw std::invalid_argument("shape_vertices: coefficient count does not match basis");
    Points out = body.template_vertices;
    kernels::omp::accumulate_basis(out, body.shape_basis, coeffs.shape);
    kernels::omp::accumulate_basis(out, body.expr_basis, coeffs.expression);
    return out;
}

Points blend_template(const ParametricBody& body, const BodyCoeffs& coeffs, const Points& offsets) {
    check_dims(body, coeffs, offsets);
    Points out = shape_vertices(body, coeffs);
    if (!body.pose_basis.empty()) kernels::omp::accumulate_basis(out, body.pose_basis, pose_features(coeffs.pose));
    out += offsets;
    return out;
}

Points compute_joints(const ParametricBody& body, const Points& shaped_vertices) {
    if (shaped_vertices.rows() != body.num_vertices())
        throw std::invalid_argument("compute_joints: vertex count mismatch");
    return body.joint_regressor * shaped_vertices;
}

SkinningTransforms skinning_transforms(const ParametricBody& body, const Points& joints, const JointRotations& pose) {
    const int nj = body.num_joints();
    if (joints.rows() != nj || pose.rows() != nj)
        throw std::invalid_argument("skinning_transforms: joints and pose must have J rows");
    if (!pose.allFinite()) throw std::invalid_argument("skinning_transforms: non-finite pose");

    SkinningTransforms tf;
    tf.rotation.resize(static_cast<std::size_t>(nj));
    tf.translation.resize(static_cast<std::size_t>(nj));
    tf.posed_joints.resize(nj, 3);
    for (int j = 0; j < nj; ++j) {
        const Matrix3d local = rodrigues(pose.row(j).transpose());
        const Vector3d rest = joints.row(j).transpose();
        const int p = body.joint_parents[static_cast<std::size_t>(j)];
        // With the rest pose folded in, t_j = t_parent + R_parent (J_j - R_j J_j);
        // an identity rotation contributes an exact zero.
        if (p < 0) {
            tf.rotation[j] = local;
            tf.translation[j] = rest - local * rest;
        } else {
            const Matrix3d& parent = tf.rotation[static_cast<std::size_t>(p)];
            tf.rotation[j] = parent * local;
            tf.translation[j] = tf.translation[static_cast<std::size_t>(p)] + parent * (rest - local * rest);
        }
        tf.posed_joints.row(j) = (tf.rotation[j] * rest + tf.translation[j]).transpose();
    }
    return tf;
}

Points linear_blend_skinning(const ParametricBody& body, const Points& vertices, const Points& joints,
                             const JointRotations& pose) {
    if (vertices.rows() != body.num_vertices())
        throw std::invalid_argument("linear_blend_skinning: vertex count mismatch");
    const SkinningTransforms tf = skinning_transforms(body, joints, pose);
    Points out;
    kernels::omp::skin(body.skinning_weights, tf, vertices, out);
    return out;
}

Points skinning_backward(const ParametricBody& body, const SkinningTransforms& tf, const Points& posed_grad) {
    const Eigen::Index n = posed_grad.rows();
    if (n != body.num_vertices()) throw std::invalid_argument("skinning_backward: vertex count mismatch");
    Points grad(n, 3);
#pragma omp parallel for schedule(static)
    for (Eigen::Index v = 0; v < n; ++v) {
        Matrix3d blended = Matrix3d::Identity();
        for (int j = 0; j < body.num_joints(); ++j) {
            const double w = body.skinning_weights(v, j);
            if (w != 0.0) blended += w * (tf.rotation[static_cast<std::size_t>(j)] - Matrix3d::Identity());
        }
        grad.row(v) = (blended.transpose() * posed_grad.row(v).transpose()).transpose();
    }
    return grad;
}

std::vector<int> coincident_representatives(const Points& vertices) {
    const auto n = static_cast<std::size_t>(vertices.rows());
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    const auto less = [&](int a, int b) {
        for (int k = 0; k < 3; ++k)
            if (vertices(a, k) != vertices(b, k)) return vertices(a, k) < vertices(b, k);
        return a < b;
    };
    std::sort(order.begin(), order.end(), less);
    std::vector<int> rep(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int v = order[i];
        const bool same = i > 0 && vertices.row(order[i - 1]) == vertices.row(v);
        rep[static_cast<std::size_t>(v)] = same ? rep[static_cast<std::size_t>(order[i - 1])] : v;
    }
    return rep;
}

namespace {

// Area-weighted normal sums, accumulated on each vertex's representative.
Points accumulate_face_normals(const Points& vertices, const Faces& faces, const std::vector<int>& rep) {
    Points acc = Points::Zero(vertices.rows(), 3);
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        const Vector3d p0 = vertices.row(faces(f, 0)).transpose();
        const Vector3d p1 = vertices.row(faces(f, 1)).transpose();
        const Vector3d p2 = vertices.row(faces(f, 2)).transpose();
        const Vector3d c = (p1 - p0).cross(p2 - p0);  // |c| = 2 * area
        for (int k = 0; k < 3; ++k) acc.row(rep[static_cast<std::size_t>(faces(f, k))]) += c.transpose();
    }
    return acc;
}

}  // namespace

Points vertex_normals(const Points& vertices, const Faces& faces) {
    const std::vector<int> rep = coincident_representatives(vertices);
    const Points acc = accumulate_face_normals(vertices, faces, rep);
    Points out(vertices.rows(), 3);
    for (Eigen::Index v = 0; v < acc.rows(); ++v) {
        const auto r = acc.row(rep[static_cast<std::size_t>(v)]);
        const double len = r.norm();
        if (len > kNormalEpsilon)
            out.row(v) = r / len;
        else
            out.row(v) << 0.0, 0.0, 1.0;
    }
    return out;
}

Points vertex_normals_backward(const Points& vertices, const Faces& faces, const Points& normal_grad) {
    if (normal_grad.rows() != vertices.rows())
        throw std::invalid_argument("vertex_normals_backward: gradient row count mismatch");
    const std::vector<int> rep = coincident_representatives(vertices);
    const Points acc = accumulate_face_normals(vertices, faces, rep);
    // Normalization Jacobian: d(m/|m|) = (I - n n^T) / |m|.
    Points grad_acc = Points::Zero(vertices.rows(), 3);
    for (Eigen::Index v = 0; v < acc.rows(); ++v) {
        const int r = rep[static_cast<std::size_t>(v)];
        const double len = acc.row(r).norm();
        if (len <= kNormalEpsilon) continue;
        const Vector3d n = acc.row(r).transpose() / len;
        const Vector3d g = normal_grad.row(v).transpose();
        grad_acc.row(r) += ((g - n * n.dot(g)) / len).transpose();
    }
    Points grad = Points::Zero(vertices.rows(), 3);
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        const int i0 = faces(f, 0), i1 = faces(f, 1), i2 = faces(f, 2);
        const Vector3d a = (vertices.row(i1) - vertices.row(i0)).transpose();
        const Vector3d b = (vertices.row(i2) - vertices.row(i0)).transpose();
        const Vector3d gc = (grad_acc.row(rep[static_cast<std::size_t>(i0)]) + grad_acc.row(rep[static_cast<std::size_t>(i1)]) +
                             grad_acc.row(rep[static_cast<std::size_t>(i2)]))
                                .transpose();
        const Vector3d ga = b.cross(gc);
        const Vector3d gb = gc.cross(a);
        grad.row(i1) += ga.transpose();
        grad.row(i2) += gb.transpose();
        grad.row(i0) -= (ga + gb).transpose();
    }
    return grad;
}

}  // namespace forge
