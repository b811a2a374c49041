#include "forge/cli.hpp"

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include <pthread.h>

#include "CLI11.hpp"
#include "forge/body_io.hpp"
#include "forge/checkpoint.hpp"
#include "forge/config.hpp"
#include "forge/driver.hpp"
#include "forge/export.hpp"
#include "forge/image_io.hpp"
#include "forge/remote_oracle.hpp"
#include "forge/version.hpp"
#include "text_util.hpp"

namespace forge {

namespace {

/// Error raised for malformed command-line values after CLI11 parsing.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Verbosity { quiet, info, debug };

Verbosity verbosity() {
    const char* v = std::getenv("FORGE_LOG");
    if (!v) return Verbosity::info;
    const std::string s(v);
    if (s == "quiet" || s == "0") return Verbosity::quiet;
    if (s == "debug" || s == "2") return Verbosity::debug;
    return Verbosity::info;
}

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

CameraParams parse_camera(const std::string& text) {
    std::vector<double> v;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const std::string part(text::trim(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        double x = 0.0;
        if (!text::parse_double(part, x)) throw UsageError("--camera: '" + text + "' is not az,el,dist");
        v.push_back(x);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (v.size() != 3 || !(v[2] > 0.0)) throw UsageError("--camera: expected az,el,dist with dist > 0, got '" + text + "'");
    CameraParams cam;
    cam.azimuth_deg = v[0];
    cam.elevation_deg = v[1];
    cam.distance = v[2];
    return cam;
}

/// Config embedded in a checkpoint, with relative paths resolved as at train time.
RunConfig checkpoint_config(const Checkpoint& c, const std::string& source) {
    return parse_config(c.config_text, source + " (embedded config)", c.base_dir);
}

int cmd_train(const std::string& config_path, const std::optional<std::string>& resume,
              const std::optional<std::uint64_t>& seed, std::ostream& out, std::ostream& err) {
    RunConfig config = load_config(config_path);
    if (seed) config.seed = *seed;
    const Verbosity verb = verbosity();
    if (verb == Verbosity::debug) err << serialize_config(config);
    RunOptions options;
    if (resume) options.resume = *resume;
    if (verb != Verbosity::quiet) options.log = [&err](const std::string& line) { err << line << '\n'; };
    const RunResult r = run_full_pipeline(config, options);
    out << r.bundle_dir.string() << '\n';
    return kExitOk;
}

int cmd_export(const std::string& ckpt_path, const std::string& pose, const std::string& out_dir, std::ostream& out) {
    const Checkpoint c = load_checkpoint(ckpt_path);
    const RunConfig config = checkpoint_config(c, ckpt_path);
    const ParametricBody body = load_body(config);
    const PoseLibrary poses = load_poses(config, body);
    if (c.state.avatar.psi_v.rows() != body.num_vertices())
        throw ValidationError("checkpoint vertex count does not match the body");
    ExportOptions eo;
    eo.pose = pose;
    eo.config_hash = sha256_hex(c.config_text);
    eo.seed = config.seed.value_or(0);
    for (const auto& f : export_bundle(out_dir, body, c.state.avatar, poses, eo))
        out << (std::filesystem::path(out_dir) / f).string() << '\n';
    return kExitOk;
}

int cmd_preview(const std::string& ckpt_path, const std::string& mode, const std::string& camera,
                const std::string& pose, int width, int height, const std::string& out_path, std::ostream& out) {
    if (mode != "normal" && mode != "albedo") throw UsageError("--mode: expected normal or albedo, got '" + mode + "'");
    CameraParams cam = parse_camera(camera);
    const Checkpoint c = load_checkpoint(ckpt_path);
    const RunConfig config = checkpoint_config(c, ckpt_path);
    const ParametricBody body = load_body(config);
    const PoseLibrary poses = load_poses(config, body);
    const Points verts = export_vertices(body, c.state.avatar, poses, pose);
    cam.look_at = compute_anchors(body, verts).body;
    cam.width = width > 0 ? width : config.training.render_width;
    cam.height = height > 0 ? height : config.training.render_height;
    const Image img = mode == "normal"
                          ? render_normal(verts, body.faces, vertex_normals(verts, body.faces), cam).image
                          : render_albedo(verts, body.faces, body.uv_coords, export_albedo(c.state.avatar), cam).image;
    write_png(out_path, img, 8);
    out << out_path << '\n';
    return kExitOk;
}

int cmd_serve(const std::string& listen, const std::optional<std::string>& target, int steps, std::ostream& out) {
    ScheduleConfig sc;
    sc.num_steps = steps;
    std::shared_ptr<const GuidanceOracle> oracle;
    if (target) {
        oracle = std::make_shared<AnalyticTargetOracle>(DiffusionSchedule(sc),
                                                        std::make_shared<const Image>(read_png(*target)));
    } else {
        struct Zeros final : GuidanceOracle {
            Image predict(const Image& z, int, const GuidanceCondition&) const override { return Image(z.width, z.height); }
        };
        oracle = std::make_shared<Zeros>();
    }
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    OracleServer server(listen, oracle);
    out << "listening " << server.endpoint() << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    server.wait();
    return kExitOk;
}

int cmd_generate(const std::string& out_path, int segments, const std::optional<std::string>& poses_path,
                 std::ostream& out) {
    if (segments < 4) throw UsageError("--segments: must be >= 4");
    const ParametricBody body = generate_test_humanoid(segments);
    save_body_asset(out_path, body);
    out << out_path << '\n';
    if (poses_path) {
        save_pose_library(*poses_path, demo_pose_library(body));
        out << *poses_path << '\n';
    }
    return kExitOk;
}

int fail(std::ostream& err, const char* category, const std::string& message, int code) {
    err << "error[" << category << "]: " << one_line(message) << std::endl;
    return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"forge: progressive text-guided avatar optimization", "forge"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::string config_path, resume_path, ckpt_path, pose = "canonical", out_path, mode, camera, listen, target;
    std::uint64_t seed = 0;
    int width = 0, height = 0, steps = 1000, segments = 8;
    std::string poses_out;

    auto* train = app.add_subcommand("train", "run the training stages and export the result");
    train->add_option("--config", config_path, "run configuration file")->required();
    auto* resume_opt = train->add_option("--resume", resume_path, "checkpoint to continue from");
    auto* seed_opt = train->add_option("--seed", seed, "master seed (overrides the config)");

    auto* exp = app.add_subcommand("export", "write a mesh/albedo bundle from a checkpoint");
    exp->add_option("--checkpoint", ckpt_path)->required();
    exp->add_option("--pose", pose, "canonical or a pose-library label");
    exp->add_option("--out", out_path, "output directory")->required();

    auto* prev = app.add_subcommand("preview", "render one view of a checkpoint to PNG");
    prev->add_option("--checkpoint", ckpt_path)->required();
    prev->add_option("--mode", mode, "normal or albedo")->required();
    prev->add_option("--camera", camera, "az,el,dist in degrees and length units")->required();
    prev->add_option("--pose", pose, "canonical or a pose-library label");
    prev->add_option("--width", width, "image width (default: config render width)");
    prev->add_option("--height", height, "image height (default: config render height)");
    prev->add_option("--out", out_path, "output PNG")->required();

    auto* serve = app.add_subcommand("serve-oracle", "serve an epsilon oracle over the wire protocol");
    serve->add_option("--listen", listen, "unix:<path> or tcp:<host>:<port>")->required();
    auto* target_opt = serve->add_option("--target", target, "target PNG for the analytic oracle (default: zeros)");
    serve->add_option("--steps", steps, "diffusion steps of the analytic oracle's schedule");

    auto* gen = app.add_subcommand("generate-humanoid", "write the procedural test humanoid as a body asset");
    gen->add_option("--out", out_path, "body asset path")->required();
    gen->add_option("--segments", segments, "facets around each limb");
    auto* poses_opt = gen->add_option("--poses", poses_out, "also write the demo pose library here");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        return fail(err, "usage", e.what(), kExitUsage);
    }

    try {
        if (train->parsed())
            return cmd_train(config_path, *resume_opt ? std::optional(resume_path) : std::nullopt,
                             *seed_opt ? std::optional(seed) : std::nullopt, out, err);
        if (exp->parsed()) return cmd_export(ckpt_path, pose, out_path, out);
        if (prev->parsed()) return cmd_preview(ckpt_path, mode, camera, pose, width, height, out_path, out);
        if (serve->parsed())
            return cmd_serve(listen, *target_opt ? std::optional(target) : std::nullopt, steps, out);
        if (gen->parsed())
            return cmd_generate(out_path, segments, *poses_opt ? std::optional(poses_out) : std::nullopt, out);
        return fail(err, "usage", "no subcommand", kExitUsage);
    } catch (const UsageError& e) {
        return fail(err, "usage", e.what(), kExitUsage);
    } catch (const ConfigError& e) {
        return fail(err, "config", e.what(), kExitConfig);
    } catch (const ParseError& e) {
        return fail(err, "parse", e.what(), kExitParse);
    } catch (const IoError& e) {
        return fail(err, "io", e.what(), kExitParse);
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(err, "io", e.what(), kExitParse);
    } catch (const ValidationError& e) {
        return fail(err, "validation", e.what(), kExitValidation);
    } catch (const GuidanceError& e) {
        return fail(err, "guidance", e.what(), kExitTraining);
    } catch (const TrainingError& e) {
        return fail(err, "training", e.what(), kExitTraining);
    } catch (const std::invalid_argument& e) {
        return fail(err, "validation", e.what(), kExitValidation);
    } catch (const std::exception& e) {
        return fail(err, "internal", e.what(), kExitInternal);
    }
}

}  // namespace forge
