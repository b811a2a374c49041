// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "forge/avp.hpp"
#include "forge/body_io.hpp"
#include "forge/checkpoint.hpp"
#include "forge/config.hpp"
#include "forge/driver.hpp"
#include "forge/export.hpp"
#include "forge/guidance.hpp"
#include "forge/pipeline.hpp"
#include "gradient_check.hpp"
#include "test_support.hpp"

using namespace forge;
using forge::testing::random_image;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_text_file(e.path());
    return files;
}

// 1. ASDS with lambda = (1, 0, 0) is SDS; AVP at initialization returns the means.
Outcome equation_degeneracy() {
    const DiffusionSchedule s;
    std::mt19937_64 gen(1);
    const auto oracle = analytic_target_oracle(s, random_image(24, 16, gen));
    const NoiseWeights sds_weights{1.0, 0.0, 0.0};
    int mismatches = 0, trials = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Image x0 = random_image(24, 16, gen);
        for (double sv : {0.0, 0.3}) {
            Rng a(seed), b(seed);
            const GuidanceResult g1 = sds_gradient(s, *oracle, x0, {}, a);
            const GuidanceResult g2 = asds_gradient(s, *oracle, x0, {}, sds_weights, sv, 0.7, b);
            mismatches += !(g1.timestep == g2.timestep && g1.pixel_grad == g2.pixel_grad && a == b);
            ++trials;
        }
    }
    int init_bad = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const AvatarParams p = AvatarParams::initial(500, 32, 32, seed);
        Rng rng(seed);
        const PerturbedSample x = sample_perturbed(p, rng);
        init_bad += !(x.psi_v_sample == p.psi_v && x.psi_a_sample == p.psi_a && x.sigma_v == 0.0 && x.sigma_a == 0.0);
    }
    return {mismatches == 0 && init_bad == 0,
            std::to_string(trials - mismatches) + "/" + std::to_string(trials) + " bitwise-equal SDS/ASDS pairs, " +
                std::to_string(10 - init_bad) + "/10 exact initial samples"};
}

// 2. Empirical std of the composed noise matches the collapsed formula.
Outcome noise_composition() {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    const NoiseWeights w;
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
        const double sv = u(gen), sa = u(gen);
        Rng rng(100 + static_cast<std::uint64_t>(k));
        const AvatarNoise n = compose_avatar_noise(w, sv, sa, rng, 1000, 334);  // 1.002e6 entries
        double sum = 0.0, sum2 = 0.0;
        for (double x : n.epsilon.data) sum += x, sum2 += x * x;
        const double count = static_cast<double>(n.epsilon.data.size());
        const double mean = sum / count;
        const double sd = std::sqrt(sum2 / count - mean * mean);
        worst = std::max(worst, std::abs(sd / effective_noise_std(w, sv, sa) - 1.0));
    }
    return {worst < 0.005, "worst relative std error " + fmt("%.4f%%", 100 * worst) + " over 5 settings (limit 0.5%)"};
}

// 3. Iterated single-step noising matches the closed form at T = 100.
Outcome schedule_consistency() {
    ScheduleConfig cfg;
    cfg.num_steps = 100;
    const DiffusionSchedule s(cfg);
    const int trials = 100000;
    const double x0 = 1.0;
    const std::vector<int> probes{1, 10, 25, 50, 75, 100};
    std::vector<double> sum(probes.size(), 0.0), sum2(probes.size(), 0.0);
    Rng rng(3);
    for (int i = 0; i < trials; ++i) {
        double x = x0;
        std::size_t p = 0;
        for (int t = 1; t <= 100; ++t) {
            x = std::sqrt(s.alpha(t)) * x + std::sqrt(1.0 - s.alpha(t)) * rng.normal();
            if (p < probes.size() && probes[p] == t) {
                sum[p] += x;
                sum2[p] += x * x;
                ++p;
            }
        }
    }
    double worst_mean = 0.0, worst_var = 0.0;
    for (std::size_t p = 0; p < probes.size(); ++p) {
        const double ab = s.alpha_bar(probes[p]);
        const double mean = sum[p] / trials;
        const double var = sum2[p] / trials - mean * mean;
        worst_mean = std::max(worst_mean, std::abs(mean / (std::sqrt(ab) * x0) - 1.0));
        worst_var = std::max(worst_var, std::abs(var / (1.0 - ab) - 1.0));
    }
    return {worst_mean < 0.02 && worst_var < 0.02,
            "worst relative error: mean " + fmt("%.3f%%", 100 * worst_mean) + ", variance " +
                fmt("%.3f%%", 100 * worst_var) + " (limit 2%)"};
}

// 4. Renderer backward passes against central finite differences at 64 x 64.
Outcome gradient_correctness() {
    using namespace forge::testing;
    FdTally albedo, normal;
    std::mt19937_64 gen(4);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const FdScene scene = make_fd_scene(seed, 64);
        const FdTally a = check_albedo_gradient(scene, 60, gen, 1e-3);
        const FdTally n = check_geometry_gradient(scene, GeometryPath::normal_image, 60, gen, 1e-2);
        albedo.checked += a.checked, albedo.passed += a.passed, albedo.worst = std::max(albedo.worst, a.worst);
        normal.checked += n.checked, normal.passed += n.passed;
    }
    const bool pass = albedo.checked > 0 && normal.checked > 0 && albedo.pass_rate() >= 0.95 &&
                      normal.pass_rate() >= 0.95;
    return {pass, "albedo " + std::to_string(albedo.passed) + "/" + std::to_string(albedo.checked) +
                      " within 1e-3, normals " + std::to_string(normal.passed) + "/" + std::to_string(normal.checked) +
                      " within 1e-2 (need 95%)"};
}

// 5. Skinning and blend-shape identities.
Outcome lbs_identities() {
    const ParametricBody body = generate_test_humanoid(8);
    BodyCoeffs zero = BodyCoeffs::zeros(body);
    const Points joints = compute_joints(body, shape_vertices(body, zero));
    const Points rest = linear_blend_skinning(body, body.template_vertices, joints, zero.pose);
    const double identity_err = (rest - body.template_vertices).cwiseAbs().maxCoeff();

    // Two joints; vertex fully bound to the child, child rotated 90 degrees about z.
    Points v(3, 3);
    v << 2.0, 1.0, 0.5, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0;
    Faces f(1, 3);
    f << 0, 1, 2;
    ParametricBody two = forge::testing::make_body(v, f, {-1, 0});
    two.joint_regressor.setZero();
    two.joint_regressor(0, 1) = 1.0;  // root at the origin
    two.joint_regressor(1, 2) = 1.0;  // child at (1, 0, 0)
    two.skinning_weights.setZero();
    two.skinning_weights(0, 1) = 1.0;
    two.skinning_weights(1, 0) = 1.0;
    two.skinning_weights(2, 0) = 1.0;
    JointRotations pose = JointRotations::Zero(2, 3);
    pose(1, 2) = M_PI / 2;
    const Points j2 = compute_joints(two, v);
    const Points posed = linear_blend_skinning(two, v, j2, pose);
    // (2, 1, 0.5) - (1, 0, 0) = (1, 1, 0.5) -> rotated (-1, 1, 0.5) -> + (1, 0, 0)
    const double rotation_err = (Vector3d(posed.row(0)) - Vector3d(0.0, 1.0, 0.5)).cwiseAbs().maxCoeff();

    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    auto random_coeffs = [&] {
        BodyCoeffs c = BodyCoeffs::zeros(body);
        for (Eigen::Index i = 0; i < c.shape.size(); ++i) c.shape[i] = nd(gen);
        for (Eigen::Index i = 0; i < c.expression.size(); ++i) c.expression[i] = nd(gen);
        return c;
    };
    const BodyCoeffs a = random_coeffs(), b = random_coeffs();
    BodyCoeffs ab = a;
    ab.shape += b.shape;
    ab.expression += b.expression;
    const Points none = Points::Zero(body.num_vertices(), 3);
    const Points base = blend_template(body, zero, none);
    const Points lhs = blend_template(body, ab, none) - base;
    const Points rhs = (blend_template(body, a, none) - base) + (blend_template(body, b, none) - base);
    const double superposition_err = (lhs - rhs).cwiseAbs().maxCoeff();

    const bool pass = identity_err < 1e-6 && rotation_err < 1e-6 && superposition_err < 1e-6;
    std::ostringstream d;
    d << "zero-pose " << identity_err << ", 90-degree joint " << rotation_err << ", superposition "
      << superposition_err << " (limit 1e-6)";
    return {pass, d.str()};
}

// 6. With the analytic oracle the residual is w(t) sqrt(ab)/sqrt(1-ab) (x0 - target), noise-free.
Outcome oracle_cancellation() {
    const DiffusionSchedule s;
    std::mt19937_64 gen(6);
    const Image target = random_image(20, 20, gen);
    const auto oracle = analytic_target_oracle(s, target);
    double worst = 0.0, worst_spread = 0.0;
    for (int k = 0; k < 20; ++k) {
        const Image x0 = random_image(20, 20, gen);
        auto expected = [&](int t, std::size_t i) {
            const double ab = s.alpha_bar(t);
            return s.weight(t) * std::sqrt(ab) / std::sqrt(1.0 - ab) * (x0.data[i] - target.data[i]);
        };
        Rng r1(static_cast<std::uint64_t>(k)), r2(static_cast<std::uint64_t>(k) + 1000);
        const GuidanceResult sds = sds_gradient(s, *oracle, x0, {}, r1);
        const GuidanceResult asds = asds_gradient(s, *oracle, x0, {}, NoiseWeights{}, 0.4, 0.2, r2);
        for (std::size_t i = 0; i < x0.data.size(); ++i) {
            worst = std::max(worst, std::abs(sds.pixel_grad.data[i] - expected(sds.timestep, i)));
            worst = std::max(worst, std::abs(asds.pixel_grad.data[i] - expected(asds.timestep, i)));
        }
        // Fixed t, many noise draws of different scales.
        const int t = 20 + 48 * k;
        std::vector<Image> grads;
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            Rng r(seed);
            Image eps(20, 20);
            const double scale = 0.5 + 0.25 * static_cast<double>(seed);
            for (double& e : eps.data) e = scale * r.normal();
            grads.push_back(distillation_residual(s, *oracle, x0, {}, t, eps));
        }
        for (std::size_t i = 0; i < x0.data.size(); ++i) {
            double lo = grads[0].data[i], hi = lo;
            for (const Image& g : grads) lo = std::min(lo, g.data[i]), hi = std::max(hi, g.data[i]);
            worst_spread = std::max(worst_spread, hi - lo);
            worst = std::max(worst, std::abs(grads[0].data[i] - expected(t, i)));
        }
    }
    return {worst < 1e-5 && worst_spread < 1e-9,
            "max deviation from closed form " + fmt("%.2e", worst) + " (limit 1e-5), max spread across noise " +
                fmt("%.2e", worst_spread)};
}

// 7. Desk-scale convergence of the three stages.
RunConfig convergence_config(const fs::path& dir, int geo, int app, int ani) {
    std::ostringstream cfg;
    cfg << "forge-config 1\n[run]\nseed = 7\noutput = out\noracle = reference:0.01\n"
        << "render_width = 64\nrender_height = 64\nalbedo_width = 64\nalbedo_height = 64\nlog_every = 0\n"
        << "[geometry]\niterations = " << geo << "\n[appearance]\niterations = " << app
        << "\n[animation]\niterations = " << ani << "\n";
    write_text_file(dir / "run.cfg", cfg.str());
    return load_config(dir / "run.cfg");
}

struct StageErrors {
    double geometry_before, geometry_after, appearance_before, appearance_after, animation_before, animation_after;
};

StageErrors measure_stages(const RunConfig& config, const fs::path& ckpt_dir) {
    const RunAssets assets = load_run_assets(config);
    const auto& targets = dynamic_cast<const ReferenceAvatarTargets&>(*assets.conditions);
    const TrainingConfig& t = config.training;
    const Points none = Points::Zero(assets.body.num_vertices(), 3);
    const auto canonical_views = evaluation_views(
        make_camera_policy(t.geometry, t, compute_anchors(assets.body, assets.body.template_vertices)), 8);
    std::vector<std::vector<CameraParams>> posed_views;
    for (const auto& p : assets.poses.poses)
        posed_views.push_back(evaluation_views(
            make_camera_policy(t.animation, t, compute_anchors(assets.body, pose_avatar(assets.body, none, p).vertices)),
            8));
    auto canonical = [&](const AvatarParams& a, RenderMode m) {
        return evaluate_image_error(assets.body, a, targets, m, -1, canonical_views);
    };
    auto posed = [&](const AvatarParams& a) {
        double s = 0.0;
        for (std::size_t p = 0; p < assets.poses.size(); ++p)
            for (RenderMode m : {RenderMode::normal, RenderMode::albedo})
                s += evaluate_image_error(assets.body, a, targets, m, static_cast<int>(p), posed_views[p], assets.poses);
        return s / (2.0 * static_cast<double>(assets.poses.size()));
    };
    const AvatarParams init = TrainState::initial(assets.body, t, *config.seed).avatar;
    const AvatarParams geo = load_checkpoint(ckpt_dir / "geometry.ckpt").state.avatar;
    const AvatarParams app = load_checkpoint(ckpt_dir / "appearance.ckpt").state.avatar;
    const AvatarParams ani = load_checkpoint(ckpt_dir / "animation.ckpt").state.avatar;
    return {canonical(init, RenderMode::normal), canonical(geo, RenderMode::normal),
            canonical(geo, RenderMode::albedo),  canonical(app, RenderMode::albedo),
            posed(app),                          posed(ani)};
}

Outcome desk_convergence() {
    const int saved_threads = omp_get_max_threads();
    omp_set_num_threads(1);
    using clock = std::chrono::steady_clock;
    const fs::path root = forge::testing::scratch_dir("acceptance-convergence");

    fs::create_directories(root / "smoke");
    const RunConfig smoke = convergence_config(root / "smoke", 10, 10, 10);
    auto t0 = clock::now();
    const RunResult smoke_run = run_full_pipeline(smoke);
    const double smoke_s = std::chrono::duration<double>(clock::now() - t0).count();

    fs::create_directories(root / "full");
    const RunConfig full = convergence_config(root / "full", 300, 500, 500);
    t0 = clock::now();
    const RunResult full_run = run_full_pipeline(full);
    const double full_s = std::chrono::duration<double>(clock::now() - t0).count();
    omp_set_num_threads(saved_threads);

    const StageErrors e = measure_stages(full, root / "full" / "out" / "checkpoints");
    const double geo = 1.0 - e.geometry_after / e.geometry_before;
    const double app = 1.0 - e.appearance_after / e.appearance_before;
    const double ani = 1.0 - e.animation_after / e.animation_before;
    const bool pass = smoke_run.completed && full_run.completed && smoke_s < 60.0 && full_s < 900.0 && geo >= 0.80 &&
                      app >= 0.90 && ani >= 0.70;
    std::ostringstream d;
    d.precision(3);
    d << "error drop geometry " << 100 * geo << "% (need 80), appearance " << 100 * app << "% (need 90), animation "
      << 100 * ani << "% (need 70); smoke " << smoke_s << " s (limit 60), 300/500/500 run " << full_s
      << " s (limit 900)";
    return {pass, d.str()};
}

// 8. Default configuration snapshot.
Outcome default_constants() {
    const std::string text = serialize_config(parse_config("forge-config 1\n[run]\nseed = 0\n"));
    std::map<std::string, std::string> kv;
    std::string section;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (line.size() > 2 && line.front() == '[') {
            section = line.substr(1, line.size() - 2);
        } else if (auto eq = line.find(" = "); eq != std::string::npos) {
            kv[section + "." + line.substr(0, eq)] = line.substr(eq + 3);
        }
    }
    std::map<std::string, std::string> expected{
        {"run.render_width", "800"},  {"run.render_height", "800"},         {"run.albedo_width", "2048"},
        {"run.albedo_height", "2048"}, {"schedule.t_min", "0.02"},          {"schedule.t_max", "0.98"},
        {"geometry.iterations", "5000"}, {"appearance.iterations", "10000"}, {"animation.iterations", "5000"},
    };
    for (const char* st : {"geometry", "appearance", "animation"}) {
        const std::string p = std::string(st) + ".";
        expected[p + "lr_psi_v"] = "1e-04";
        expected[p + "lr_psi_a"] = "0.005";
        expected[p + "lambda_n"] = "0.8";
        expected[p + "lambda_v"] = "0.1";
        expected[p + "lambda_a"] = "0.1";
        expected[p + "head_probability"] = "0.2";
    }
    std::vector<std::string> wrong;
    for (const auto& [key, value] : expected)
        if (kv[key] != value) wrong.push_back(key + "=" + kv[key]);
    const TrainingConfig d = TrainingConfig::defaults();
    bool exact = d.render_width == 800 && d.albedo_width == 2048 && d.schedule.t_min_fraction == 0.02 &&
                 d.schedule.t_max_fraction == 0.98;
    for (Stage s : {Stage::geometry, Stage::appearance, Stage::animation})
        exact = exact && d.stage(s).lr_psi_v == 1e-4 && d.stage(s).lr_psi_a == 5e-3 &&
                d.stage(s).noise_weights == NoiseWeights{0.8, 0.1, 0.1} && d.stage(s).head_probability == 0.2;
    std::string detail = std::to_string(expected.size() - wrong.size()) + "/" + std::to_string(expected.size()) +
                         " snapshot keys match";
    for (const auto& w : wrong) detail += "; mismatch " + w;
    return {wrong.empty() && exact, detail};
}

// 9. Seeded reruns and resumed runs give byte-identical bundles.
Outcome determinism() {
    const fs::path root = forge::testing::scratch_dir("acceptance-determinism");
    auto config_in = [&](const std::string& name) {
        fs::create_directories(root / name);
        return convergence_config(root / name, 12, 12, 12);
    };
    const RunConfig a = config_in("a"), b = config_in("b"), c = config_in("c"), d = config_in("d");
    run_full_pipeline(a);
    run_full_pipeline(b);
    const auto bundle_a = read_tree(root / "a" / "out" / "bundle");
    const bool rerun_equal = bundle_a == read_tree(root / "b" / "out" / "bundle");

    // Interrupt mid-geometry, then mid-animation, resuming each time.
    RunOptions stop_geo, stop_ani;
    stop_geo.interrupt = [](const TrainState& s) { return s.stage == Stage::geometry && s.iteration == 5; };
    stop_ani.interrupt = [](const TrainState& s) { return s.stage == Stage::animation && s.iteration == 7; };
    const RunResult p1 = run_full_pipeline(c, stop_geo);
    RunOptions resume = stop_ani;
    resume.resume = p1.checkpoint;
    const RunResult p2 = run_full_pipeline(c, resume);
    RunOptions finish;
    finish.resume = p2.checkpoint;
    const RunResult p3 = run_full_pipeline(c, finish);
    const bool resume_equal = !p1.completed && !p2.completed && p3.completed &&
                              read_tree(root / "c" / "out" / "bundle") == bundle_a;

    // Resume from the stage-boundary checkpoint of a finished run.
    run_full_pipeline(d, stop_ani);
    RunOptions from_boundary;
    from_boundary.resume = root / "d" / "out" / "checkpoints" / "appearance.ckpt";
    run_full_pipeline(d, from_boundary);
    const bool boundary_equal = read_tree(root / "d" / "out" / "bundle") == bundle_a;

    return {rerun_equal && resume_equal && boundary_equal,
            std::string("rerun ") + (rerun_equal ? "identical" : "DIFFERS") + ", mid-stage resume " +
                (resume_equal ? "identical" : "DIFFERS") + ", stage-boundary resume " +
                (boundary_equal ? "identical" : "DIFFERS") + " (" + std::to_string(bundle_a.size()) + " files)"};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;  // 0: no runtime limit
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "equation degeneracy", 1.0, equation_degeneracy},
        {2, "noise composition law", 10.0, noise_composition},
        {3, "schedule consistency", 30.0, schedule_consistency},
        {4, "renderer gradient correctness", 60.0, gradient_correctness},
        {5, "skinning and blend-shape identities", 0.0, lbs_identities},
        {6, "oracle cancellation", 0.0, oracle_cancellation},
        {7, "desk-scale convergence", 0.0, desk_convergence},
        {8, "default configuration constants", 0.0, default_constants},
        {9, "determinism and persistence", 0.0, determinism},
    };
    int failed = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0 && secs >= c.budget_s) {
            o.pass = false;
            o.detail += "; over the " + fmt("%.0f", c.budget_s) + " s budget";
        }
        failed += !o.pass;
        std::printf("%s %d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
    return failed == 0 ? 0 : 1;
}
