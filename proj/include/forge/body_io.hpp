#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "forge/body_model.hpp"

namespace forge {

/// Labelled axis-angle poses, one J x 3 block per entry.
struct PoseLibrary {
    std::vector<std::string> labels;
    std::vector<JointRotations> poses;

    std::size_t size() const { return poses.size(); }
    /// Index of `label`, or -1.
    int find(const std::string& label) const;
    bool operator==(const PoseLibrary&) const = default;
};

// Body asset text format:
//
//   forge-body 1
//   vertices <N>
//   faces <F>
//   joints <J>
//   shape <S>
//   pose <P>
//   expression <E>
//   [template_vertices]   N lines: x y z
//   [faces]               F lines: i j k
//   [uv_coords]           N lines: u v
//   [shape_basis]         S * N lines: dx dy dz, component-major
//   [pose_basis]          P * N lines
//   [expr_basis]          E * N lines
//   [joint_regressor]     J lines of N weights
//   [skinning_weights]    N lines of J weights
//   [joint_parents]       J lines: parent index, -1 for the root
//   [joint_names]         optional, J lines
//
// Blank lines and lines starting with '#' are ignored.

ParametricBody parse_body_asset(const std::string& content, const std::string& source = "<memory>");
ParametricBody load_body_asset(const std::filesystem::path& path);
std::string serialize_body_asset(const ParametricBody& body);
void save_body_asset(const std::filesystem::path& path, const ParametricBody& body);

// Pose library text format:
//
//   forge-poses 1
//   joints <J>
//   <label> <3 * J axis-angle values, radians>
//   ...

PoseLibrary parse_pose_library(const std::string& content, const std::string& source = "<memory>");
PoseLibrary load_pose_library(const std::filesystem::path& path);
std::string serialize_pose_library(const PoseLibrary& poses);
void save_pose_library(const std::filesystem::path& path, const PoseLibrary& poses);
/// Throws ValidationError if empty, mislabelled or sized for another skeleton.
void validate(const PoseLibrary& poses, int num_joints);

/// Capsule-limbed biped with a 17-joint skeleton (3 joints per limb), cylindrical
/// UVs laid out one tile per capsule, two shape components, one expression
/// component and small pose correctives. `n_segments` is the number of facets
/// around each capsule (>= 4).
ParametricBody generate_test_humanoid(int n_segments = 8);

/// Single-joint UV sphere centred at the origin.
ParametricBody generate_sphere_body(int rings, int segments, double radius = 1.0);

/// A handful of named poses for the test humanoid: canonical, arms_down,
/// stride, reach.
PoseLibrary demo_pose_library(const ParametricBody& humanoid);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace forge
