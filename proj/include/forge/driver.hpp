#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "forge/config.hpp"
#include "forge/pipeline.hpp"

namespace forge {

/// Body, poses, oracle and conditions resolved from a RunConfig.
struct RunAssets {
    ParametricBody body;
    PoseLibrary poses;
    std::unique_ptr<GuidanceOracle> oracle;
    std::unique_ptr<ConditionSource> conditions;
};

/// Loads or generates everything the config references. Throws ConfigError
/// for unusable references, ParseError/ValidationError for bad files.
RunAssets load_run_assets(const RunConfig& config);
ParametricBody load_body(const RunConfig& config);
PoseLibrary load_poses(const RunConfig& config, const ParametricBody& body);

struct RunOptions {
    std::optional<std::filesystem::path> resume;
    std::function<void(const std::string&)> log;
    /// Stops the run after the iteration for which it returns true; the state
    /// is checkpointed first.
    std::function<bool(const TrainState&)> interrupt;
};

struct RunResult {
    TrainState state;
    bool completed = false;
    std::filesystem::path bundle_dir;
    std::filesystem::path checkpoint;  // latest checkpoint written
};

// Output directory layout:
//   <output>/.forge.lock            held while a run is active
//   <output>/checkpoints/latest.ckpt
//   <output>/checkpoints/<stage>.ckpt   state after each completed stage
//   <output>/bundle/                the exported avatar

/// Runs the enabled stages in order, checkpointing along the way, and exports
/// the bundle. With `resume`, continues from the checkpoint, which must have
/// been written under the same configuration.
RunResult run_full_pipeline(const RunConfig& config, const RunOptions& options = {});
RunResult run_full_pipeline(const std::filesystem::path& config_file, const RunOptions& options = {});

/// Exclusive advisory lock on <dir>/.forge.lock; released on destruction.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    int fd_ = -1;
};

}  // namespace forge
