#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "forge/types.hpp"

namespace forge {

/// Parametric human body: template mesh, linear blend-shape bases, joint
/// regressor, skinning weights and the joint tree.
///
/// Arrays follow the usual SMPL layout. `pose_basis` is either empty or holds
/// 9 * (J - 1) components, one per entry of the flattened (R - I) matrix of
/// each non-root joint.
struct ParametricBody {
    Points template_vertices;
    Faces faces;
    UVs uv_coords;
    std::vector<Points> shape_basis;
    std::vector<Points> pose_basis;
    std::vector<Points> expr_basis;
    Eigen::MatrixXd joint_regressor;   // J x N
    Eigen::MatrixXd skinning_weights;  // N x J
    std::vector<int> joint_parents;    // -1 for the root
    std::vector<std::string> joint_names;  // optional, empty or J entries

    int num_vertices() const { return static_cast<int>(template_vertices.rows()); }
    int num_faces() const { return static_cast<int>(faces.rows()); }
    int num_joints() const { return static_cast<int>(joint_parents.size()); }
    int num_shape() const { return static_cast<int>(shape_basis.size()); }
    int num_pose() const { return static_cast<int>(pose_basis.size()); }
    int num_expression() const { return static_cast<int>(expr_basis.size()); }

    /// Index of the joint named "head", or the highest joint when unnamed.
    int head_joint() const;

    bool operator==(const ParametricBody& o) const;
};

/// Throws ValidationError naming the first violated invariant.
void validate(const ParametricBody& body);

/// Axis-angle rotation per joint, J x 3, radians.
using JointRotations = Points;

struct BodyCoeffs {
    Eigen::VectorXd shape;
    JointRotations pose;
    Eigen::VectorXd expression;

    static BodyCoeffs zeros(const ParametricBody& body);
};

/// Rodrigues' formula.
Matrix3d rodrigues(const Vector3d& axis_angle);

/// Flattened (R_j - I) for every non-root joint, length 9 * (J - 1).
Eigen::VectorXd pose_features(const JointRotations& pose);

/// Template plus shape, pose and expression blend shapes, plus per-vertex
/// offsets in canonical space. Throws std::invalid_argument on any dimension
/// mismatch.
Points blend_template(const ParametricBody& body, const BodyCoeffs& coeffs, const Points& offsets);

/// Template plus shape and expression blend shapes only; the joint regressor
/// input.
Points shape_vertices(const ParametricBody& body, const BodyCoeffs& coeffs);

/// joint_regressor * shaped_vertices.
Points compute_joints(const ParametricBody& body, const Points& shaped_vertices);

/// World-space rigid transform of each joint with the rest pose removed, so
/// that the zero pose maps to identity.
struct SkinningTransforms {
    std::vector<Matrix3d> rotation;
    std::vector<Vector3d> translation;
    Points posed_joints;  // world positions of the joints after posing
};

SkinningTransforms skinning_transforms(const ParametricBody& body, const Points& joints,
                                       const JointRotations& pose);

Points linear_blend_skinning(const ParametricBody& body, const Points& vertices, const Points& joints,
                             const JointRotations& pose);

/// Pull a gradient on skinned vertices back onto the unposed vertices.
/// Skinning is affine in the input vertices, so this is the transpose of the
/// per-vertex blended rotation.
Points skinning_backward(const ParametricBody& body, const SkinningTransforms& transforms,
                         const Points& posed_grad);

/// For each vertex, the lowest index holding exactly the same position. uv
/// seams duplicate vertices; this recovers which copies belong together.
std::vector<int> coincident_representatives(const Points& vertices);

/// Area-weighted vertex normals. Vertices at identical positions share one
/// normal, so uv seams shade smoothly. Vertices whose accumulated normal
/// vanishes get (0, 0, 1).
Points vertex_normals(const Points& vertices, const Faces& faces);

/// Reverse mode of vertex_normals: gradient on the emitted unit normals to a
/// gradient on vertex positions.
Points vertex_normals_backward(const Points& vertices, const Faces& faces, const Points& normal_grad);

}  // namespace forge
