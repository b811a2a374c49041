#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "forge/avp.hpp"
#include "forge/body_io.hpp"
#include "forge/body_model.hpp"

namespace forge {

struct ExportOptions {
    /// "canonical" or a pose-library label; selects the pose of avatar.obj.
    std::string pose = "canonical";
    /// Also write poses/<label>.obj for every library pose.
    bool pose_meshes = true;
    std::string config_hash;
    std::uint64_t seed = 0;
};

// Bundle layout:
//   avatar.obj       mesh at the requested pose, mean offsets applied, with uvs
//   avatar.mtl       material referencing albedo.png
//   albedo.png       16-bit mean albedo, clamped to [0, 1]
//   poses/<l>.obj    one mesh per library pose
//   manifest.json    versions, config hash, published default hyper-parameters

/// Mesh of the avatar means at a pose ("canonical" or a library label).
/// Throws ValidationError listing the available labels for an unknown one.
Points export_vertices(const ParametricBody& body, const AvatarParams& avatar, const PoseLibrary& poses,
                       const std::string& pose);

/// Writes the bundle; returns the files written, relative to `dir`.
std::vector<std::string> export_bundle(const std::filesystem::path& dir, const ParametricBody& body,
                                       const AvatarParams& avatar, const PoseLibrary& poses,
                                       const ExportOptions& options);

/// Albedo means clamped to [0, 1].
Image export_albedo(const AvatarParams& avatar);

}  // namespace forge
