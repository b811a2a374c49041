#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "forge/pipeline.hpp"

namespace forge {

/// Where epsilon predictions come from.
struct OracleSpec {
    enum class Kind {
        analytic,   // `target` is an image file; every view distills toward it
        reference,  // synthetic reference avatar rendered per view, `amplitude` sets its offsets
        remote,     // `target` is an endpoint, unix:<path> or tcp:<host>:<port>
    };
    Kind kind = Kind::reference;
    std::string target;
    double amplitude = 0.01;
    int timeout_ms = 30000;
    std::string condition_id;

    /// "analytic:<path>", "reference:<amplitude>" or "remote:<endpoint>".
    static OracleSpec parse(const std::string& text);
    std::string to_string() const;
    bool operator==(const OracleSpec&) const = default;
};

struct RunConfig {
    std::string body = "test-humanoid";  // asset path, or the built-in test humanoid
    int humanoid_segments = 8;
    std::string pose_library = "demo";  // file path, "demo", or empty
    OracleSpec oracle;
    std::string output = "forge-out";
    std::optional<std::uint64_t> seed;
    std::vector<Stage> stages{Stage::geometry, Stage::appearance, Stage::animation};
    TrainingConfig training = TrainingConfig::defaults();
    /// Directory that relative paths are resolved against. Not serialized.
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::string& path) const;
    bool runs(Stage s) const;
    bool operator==(const RunConfig&) const = default;
};

// Config text format:
//
//   forge-config 1
//   [run]         body, humanoid_segments, pose_library, oracle, oracle_timeout_ms,
//                 condition, output, seed, stages, render_width, render_height,
//                 albedo_width, albedo_height, checkpoint_every, log_every
//   [schedule]    num_steps, beta_start, beta_end, t_min, t_max, weighting
//   [geometry] [appearance] [animation]
//                 iterations, lr_psi_v, lr_psi_a, lambda_n, lambda_v, lambda_a,
//                 head_probability, body_azimuth, body_elevation, body_distance,
//                 body_fov, head_azimuth, head_elevation, head_distance, head_fov,
//                 losses, perturbation, fixed_lambda_v, fixed_lambda_a, clip_norm,
//                 color_geometry_grad
//
// One `key = value` per line; ranges are two numbers. Keys left out keep their
// defaults. Unknown sections and keys are errors.

/// Parses and checks values. Every problem is collected into one ConfigError.
RunConfig parse_config(const std::string& content, const std::string& source = "<memory>",
                       const std::filesystem::path& base_dir = {});
/// parse_config on a file, plus the checks that need the filesystem
/// (referenced files must exist).
RunConfig load_config(const std::filesystem::path& path);
/// Full text form listing every key; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// Semantic checks. With `check_paths`, referenced files must exist.
std::vector<std::string> config_problems(const RunConfig& config, bool check_paths);

/// Hex SHA-256 of serialize_config(config).
std::string config_hash(const RunConfig& config);
std::string sha256_hex(const std::string& bytes);

}  // namespace forge
