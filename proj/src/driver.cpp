#include "forge/driver.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "forge/checkpoint.hpp"
#include "forge/export.hpp"
#include "forge/image_io.hpp"
#include "forge/remote_oracle.hpp"

namespace forge {

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::string path = (dir / ".forge.lock").string();
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw ConfigError({"run.output: " + dir.string() + " is in use by another forge process"});
    }
}

DirectoryLock::~DirectoryLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

ParametricBody load_body(const RunConfig& config) {
    ParametricBody body = config.body == "test-humanoid" ? generate_test_humanoid(config.humanoid_segments)
                                                         : load_body_asset(config.resolve(config.body));
    validate(body);
    return body;
}

PoseLibrary load_poses(const RunConfig& config, const ParametricBody& body) {
    if (config.pose_library.empty()) return {};
    PoseLibrary poses;
    if (config.pose_library == "demo") {
        try {
            poses = demo_pose_library(body);
        } catch (const std::invalid_argument& e) {
            throw ConfigError({std::string("run.pose_library: demo poses need the test humanoid skeleton (") +
                               e.what() + ")"});
        }
    } else {
        poses = load_pose_library(config.resolve(config.pose_library));
    }
    validate(poses, body.num_joints());
    return poses;
}

RunAssets load_run_assets(const RunConfig& config) {
    RunAssets a;
    a.body = load_body(config);
    a.poses = load_poses(config, a.body);
    const DiffusionSchedule schedule(config.training.schedule);
    const OracleSpec& spec = config.oracle;
    switch (spec.kind) {
        case OracleSpec::Kind::analytic: {
            auto target = std::make_shared<const Image>(read_png(config.resolve(spec.target)));
            if (target->width != config.training.render_width || target->height != config.training.render_height)
                throw ConfigError({"run.oracle: target image is " + std::to_string(target->width) + "x" +
                                   std::to_string(target->height) + ", render size is " +
                                   std::to_string(config.training.render_width) + "x" +
                                   std::to_string(config.training.render_height)});
            a.oracle = std::make_unique<AnalyticTargetOracle>(schedule, target);
            a.conditions = std::make_unique<FixedCondition>(GuidanceCondition{target, spec.condition_id});
            break;
        }
        case OracleSpec::Kind::reference: {
            const std::uint64_t seed = config.seed.value_or(0) ^ 0x5eed5eed5eed5eedull;
            AvatarParams ref = make_reference_avatar(a.body, config.training.albedo_width,
                                                     config.training.albedo_height, spec.amplitude, seed);
            a.oracle = std::make_unique<AnalyticTargetOracle>(schedule);
            a.conditions = std::make_unique<ReferenceAvatarTargets>(a.body, std::move(ref), a.poses);
            break;
        }
        case OracleSpec::Kind::remote: {
            a.oracle = std::make_unique<RemoteOracle>(spec.target, std::chrono::milliseconds(spec.timeout_ms));
            a.conditions = std::make_unique<FixedCondition>(GuidanceCondition{nullptr, spec.condition_id + "::normal"},
                                                            GuidanceCondition{nullptr, spec.condition_id});
            break;
        }
    }
    return a;
}

RunResult run_full_pipeline(const RunConfig& config, const RunOptions& options) {
    if (auto problems = config_problems(config, true); !problems.empty()) throw ConfigError(std::move(problems));
    RunAssets assets = load_run_assets(config);
    const std::filesystem::path out_dir = config.resolve(config.output);
    DirectoryLock lock(out_dir);
    const std::filesystem::path ckpt_dir = out_dir / "checkpoints";
    std::filesystem::create_directories(ckpt_dir);

    const std::string config_text = serialize_config(config);
    RunResult result;
    if (options.resume) {
        Checkpoint c = load_checkpoint(*options.resume);
        if (c.config_text != config_text)
            throw ConfigError({"--resume: checkpoint " + options.resume->string() +
                               " was written under a different configuration"});
        result.state = std::move(c.state);
        if (result.state.avatar.psi_v.rows() != assets.body.num_vertices())
            throw ValidationError("checkpoint vertex count does not match the body");
    } else {
        result.state = TrainState::initial(assets.body, config.training, *config.seed);
    }

    result.checkpoint = ckpt_dir / "latest.ckpt";
    const std::string base_dir = config.base_dir.string();
    auto save = [&](const TrainState& s) { save_checkpoint(result.checkpoint, Checkpoint{config_text, base_dir, s}); };
    StageHooks hooks;
    hooks.log = options.log;
    hooks.interrupt = options.interrupt;
    hooks.checkpoint = [&](const TrainState& s) {
        save(s);
        if (s.iteration == 0 && s.stage != Stage::geometry) {
            const Stage finished = static_cast<Stage>(static_cast<int>(s.stage) - 1);
            save_checkpoint(ckpt_dir / (std::string(stage_name(finished)) + ".ckpt"),
                            Checkpoint{config_text, base_dir, s});
        }
    };

    TrainState& state = result.state;
    for (Stage s : {Stage::geometry, Stage::appearance, Stage::animation}) {
        if (state.stage != s) continue;
        if (!config.runs(s)) {
            state.stage = static_cast<Stage>(static_cast<int>(s) + 1);
            continue;
        }
        if (options.log) options.log(std::string("begin stage=") + stage_name(s));
        switch (s) {
            case Stage::geometry:
                state = run_geometry_stage(assets.body, std::move(state), config.training, *assets.oracle,
                                           *assets.conditions, hooks);
                break;
            case Stage::appearance:
                state = run_appearance_stage(assets.body, std::move(state), config.training, *assets.oracle,
                                             *assets.conditions, hooks);
                break;
            case Stage::animation:
                state = run_animation_stage(assets.body, std::move(state), config.training, *assets.oracle,
                                            *assets.conditions, assets.poses, hooks);
                break;
            case Stage::done: break;
        }
        if (state.stage == s) {  // interrupted
            save(state);
            return result;
        }
    }

    save(state);
    ExportOptions eo;
    eo.config_hash = sha256_hex(config_text);
    eo.seed = *config.seed;
    result.bundle_dir = out_dir / "bundle";
    export_bundle(result.bundle_dir, assets.body, state.avatar, assets.poses, eo);
    result.completed = true;
    if (options.log) options.log("done bundle=" + result.bundle_dir.string());
    return result;
}

RunResult run_full_pipeline(const std::filesystem::path& config_file, const RunOptions& options) {
    return run_full_pipeline(load_config(config_file), options);
}

}  // namespace forge
