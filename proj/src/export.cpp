#include "forge/export.hpp"

#include <algorithm>

#include "forge/image_io.hpp"
#include "forge/mesh_io.hpp"
#include "forge/pipeline.hpp"
#include "forge/version.hpp"
#include "json.hpp"

namespace forge {

Points export_vertices(const ParametricBody& body, const AvatarParams& avatar, const PoseLibrary& poses,
                       const std::string& pose) {
    const Points& offsets = inference_params(avatar).psi_v;
    if (pose == "canonical" && poses.find("canonical") < 0)
        return pose_avatar(body, offsets, JointRotations::Zero(body.num_joints(), 3)).vertices;
    const int idx = poses.find(pose);
    if (idx < 0) {
        std::string labels = "canonical";
        for (const auto& l : poses.labels)
            if (l != "canonical") labels += ", " + l;
        throw ValidationError("unknown pose '" + pose + "'; available: " + labels);
    }
    return pose_avatar(body, offsets, poses.poses[static_cast<std::size_t>(idx)]).vertices;
}

Image export_albedo(const AvatarParams& avatar) {
    Image out = inference_params(avatar).psi_a;
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

std::vector<std::string> export_bundle(const std::filesystem::path& dir, const ParametricBody& body,
                                       const AvatarParams& avatar, const PoseLibrary& poses,
                                       const ExportOptions& options) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    ObjMesh mesh{export_vertices(body, avatar, poses, options.pose), body.uv_coords, body.faces};
    fs::create_directories(dir);

    write_text_file(dir / "avatar.obj", write_obj(mesh, "avatar.mtl", "avatar"));
    files.push_back("avatar.obj");
    write_text_file(dir / "avatar.mtl",
                    "newmtl avatar\nKa 0 0 0\nKd 1 1 1\nKs 0 0 0\nillum 1\nmap_Kd albedo.png\n");
    files.push_back("avatar.mtl");
    write_png(dir / "albedo.png", export_albedo(avatar), 16);
    files.push_back("albedo.png");

    if (options.pose_meshes && poses.size() > 0) {
        fs::create_directories(dir / "poses");
        for (std::size_t i = 0; i < poses.size(); ++i) {
            mesh.vertices = pose_avatar(body, inference_params(avatar).psi_v, poses.poses[i]).vertices;
            const std::string name = "poses/" + poses.labels[i] + ".obj";
            write_text_file(dir / name, write_obj(mesh, "../avatar.mtl", "avatar"));
            files.push_back(name);
        }
    }

    const TrainingConfig d = TrainingConfig::defaults();
    nlohmann::ordered_json m;
    m["format"] = "forge-bundle";
    m["format_version"] = 1;
    m["tool_version"] = kToolVersion;
    m["config_hash"] = options.config_hash;
    m["seed"] = options.seed;
    m["pose"] = options.pose;
    m["vertices"] = body.num_vertices();
    m["faces"] = body.num_faces();
    m["albedo"] = {avatar.psi_a.width, avatar.psi_a.height};
    m["defaults"] = {
        {"lr_psi_v", d.geometry.lr_psi_v},
        {"lr_psi_a", d.appearance.lr_psi_a},
        {"lambda", {d.geometry.noise_weights.lambda_n, d.geometry.noise_weights.lambda_v,
                    d.geometry.noise_weights.lambda_a}},
        {"iterations", {d.geometry.iterations, d.appearance.iterations, d.animation.iterations}},
        {"head_probability", d.geometry.head_probability},
        {"t_range", {d.schedule.t_min_fraction, d.schedule.t_max_fraction}},
        {"render_resolution", {d.render_width, d.render_height}},
        {"albedo_resolution", {d.albedo_width, d.albedo_height}},
    };
    files.push_back("manifest.json");
    m["files"] = files;
    write_text_file(dir / "manifest.json", m.dump(2) + "\n");
    return files;
}

}  // namespace forge
