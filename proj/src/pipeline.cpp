#include "forge/pipeline.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "forge/kernels.hpp"
#include "text_util.hpp"

namespace forge {

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::geometry: return "geometry";
        case Stage::appearance: return "appearance";
        case Stage::animation: return "animation";
        case Stage::done: return "done";
    }
    return "?";
}

Stage parse_stage(const std::string& name) {
    for (Stage s : {Stage::geometry, Stage::appearance, Stage::animation, Stage::done})
        if (name == stage_name(s)) return s;
    throw std::invalid_argument("unknown stage '" + name + "'");
}

namespace {

void check_range(std::vector<std::string>& out, const std::string& prefix, const char* name, double lo, double hi) {
    if (!(lo <= hi)) out.push_back(prefix + "." + name + ": minimum exceeds maximum");
}

void check_view(std::vector<std::string>& out, const std::string& prefix, const ViewRange& v) {
    check_range(out, prefix, "azimuth", v.azimuth_min, v.azimuth_max);
    check_range(out, prefix, "elevation", v.elevation_min, v.elevation_max);
    check_range(out, prefix, "distance", v.distance_min, v.distance_max);
    if (!(v.distance_min > 0.0)) out.push_back(prefix + ".distance: must be positive");
    if (!(v.fov_y_deg > 0.0 && v.fov_y_deg < 180.0)) out.push_back(prefix + ".fov_y: must lie in (0, 180)");
}

}  // namespace

std::vector<std::string> StageConfig::check(const std::string& prefix) const {
    std::vector<std::string> out;
    if (iterations < 0) out.push_back(prefix + ".iterations: must be >= 0");
    if (!(lr_psi_v > 0.0)) out.push_back(prefix + ".lr_psi_v: must be positive");
    if (!(lr_psi_a > 0.0)) out.push_back(prefix + ".lr_psi_a: must be positive");
    if (!(noise_weights.lambda_n >= 0.0)) out.push_back(prefix + ".lambda_n: must be >= 0");
    if (!(noise_weights.lambda_v >= 0.0)) out.push_back(prefix + ".lambda_v: must be >= 0");
    if (!(noise_weights.lambda_a >= 0.0)) out.push_back(prefix + ".lambda_a: must be >= 0");
    if (!(head_probability >= 0.0 && head_probability <= 1.0))
        out.push_back(prefix + ".head_probability: must lie in [0, 1]");
    check_view(out, prefix + ".body_view", body_view);
    check_view(out, prefix + ".head_view", head_view);
    if (!(perturbation.fixed_lambda_v >= 0.0)) out.push_back(prefix + ".fixed_lambda_v: must be >= 0");
    if (!(perturbation.fixed_lambda_a >= 0.0)) out.push_back(prefix + ".fixed_lambda_a: must be >= 0");
    if (!(clip_norm > 0.0)) out.push_back(prefix + ".clip_norm: must be positive");
    return out;
}

void StageConfig::validate(const std::string& prefix) const {
    auto problems = check(prefix);
    if (!problems.empty()) throw ConfigError(std::move(problems));
}

TrainingConfig TrainingConfig::defaults() {
    TrainingConfig c;
    c.geometry.iterations = 5000;
    c.geometry.enabled_losses = {true, false};
    c.appearance.iterations = 10000;
    c.appearance.enabled_losses = {false, true};
    c.animation.iterations = 5000;
    c.animation.enabled_losses = {true, true};
    return c;
}

const StageConfig& TrainingConfig::stage(Stage s) const {
    switch (s) {
        case Stage::geometry: return geometry;
        case Stage::appearance: return appearance;
        case Stage::animation: return animation;
        case Stage::done: break;
    }
    throw std::invalid_argument("TrainingConfig::stage: no config for the done stage");
}

StageConfig& TrainingConfig::stage(Stage s) {
    return const_cast<StageConfig&>(static_cast<const TrainingConfig&>(*this).stage(s));
}

TrainState TrainState::initial(const ParametricBody& body, const TrainingConfig& config, std::uint64_t seed) {
    TrainState s;
    s.avatar = AvatarParams::initial(body.num_vertices(), config.albedo_width, config.albedo_height, seed);
    s.rng = Rng(seed);
    return s;
}

PosedMesh pose_avatar(const ParametricBody& body, const Points& offsets, const JointRotations& pose) {
    BodyCoeffs coeffs = BodyCoeffs::zeros(body);
    coeffs.pose = pose;
    const Points blended = blend_template(body, coeffs, offsets);
    const Points joints = compute_joints(body, shape_vertices(body, coeffs));
    PosedMesh mesh;
    mesh.transforms = skinning_transforms(body, joints, pose);
    kernels::omp::skin(body.skinning_weights, mesh.transforms, blended, mesh.vertices);
    return mesh;
}

ViewAnchors compute_anchors(const ParametricBody& body, const Points& vertices) {
    ViewAnchors a;
    if (vertices.rows() == 0) return a;
    const Vector3d lo = vertices.colwise().minCoeff().transpose();
    const Vector3d hi = vertices.colwise().maxCoeff().transpose();
    a.body = 0.5 * (lo + hi);
    const int head = body.head_joint();
    Vector3d sum = Vector3d::Zero();
    int count = 0;
    for (Eigen::Index v = 0; v < vertices.rows(); ++v) {
        if (body.skinning_weights(v, head) >= 0.5) {
            sum += vertices.row(v).transpose();
            ++count;
        }
    }
    a.head = count > 0 ? Vector3d(sum / count) : a.body;
    return a;
}

CameraPolicy make_camera_policy(const StageConfig& stage, const TrainingConfig& config, const ViewAnchors& anchors) {
    CameraPolicy p;
    p.body = stage.body_view;
    p.head = stage.head_view;
    p.head_probability = stage.head_probability;
    p.body_anchor = anchors.body;
    p.head_anchor = anchors.head;
    p.width = config.render_width;
    p.height = config.render_height;
    return p;
}

std::vector<CameraParams> evaluation_views(const CameraPolicy& policy, int count) {
    std::vector<CameraParams> views;
    const ViewRange& r = policy.body;
    for (int i = 0; i < count; ++i) {
        CameraParams cam;
        cam.azimuth_deg = r.azimuth_min + (r.azimuth_max - r.azimuth_min) * (i + 0.5) / count;
        cam.elevation_deg = 0.5 * (r.elevation_min + r.elevation_max);
        cam.distance = 0.5 * (r.distance_min + r.distance_max);
        cam.fov_y_deg = r.fov_y_deg;
        cam.look_at = policy.body_anchor;
        cam.width = policy.width;
        cam.height = policy.height;
        views.push_back(cam);
    }
    return views;
}

AvatarParams make_reference_avatar(const ParametricBody& body, int albedo_width, int albedo_height,
                                   double offset_amplitude, std::uint64_t seed) {
    Rng rng(seed);
    AvatarParams ref = AvatarParams::initial(body.num_vertices(), albedo_width, albedo_height, seed);
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    // Offsets: a smooth function of position only, so coincident seam vertices move together.
    Vector3d k[3];
    double phase[3];
    for (int c = 0; c < 3; ++c) {
        k[c] = Vector3d(rng.normal(), rng.normal(), rng.normal()).normalized() * 8.0;
        phase[c] = kTwoPi * rng.uniform();
    }
    for (Eigen::Index v = 0; v < ref.psi_v.rows(); ++v) {
        const Vector3d p = body.template_vertices.row(v).transpose();
        for (int c = 0; c < 3; ++c) ref.psi_v(v, c) = offset_amplitude * std::sin(k[c].dot(p) + phase[c]);
    }
    double fu[3], fv[3], ph[3];
    for (int c = 0; c < 3; ++c) {
        fu[c] = 1.0 + std::floor(3.0 * rng.uniform());
        fv[c] = 1.0 + std::floor(3.0 * rng.uniform());
        ph[c] = kTwoPi * rng.uniform();
    }
    for (int y = 0; y < albedo_height; ++y) {
        const double v = 1.0 - (y + 0.5) / albedo_height;
        for (int x = 0; x < albedo_width; ++x) {
            const double u = (x + 0.5) / albedo_width;
            for (int c = 0; c < 3; ++c)
                ref.psi_a.at(x, y, c) = 0.5 + 0.3 * std::sin(kTwoPi * (fu[c] * u + fv[c] * v) + ph[c]);
        }
    }
    return ref;
}

ReferenceAvatarTargets::ReferenceAvatarTargets(const ParametricBody& body, AvatarParams reference, PoseLibrary poses)
    : body_(body), reference_(std::move(reference)), poses_(std::move(poses)) {
    posed_.push_back(pose_avatar(body_, reference_.psi_v, JointRotations::Zero(body_.num_joints(), 3)).vertices);
    for (const auto& pose : poses_.poses) posed_.push_back(pose_avatar(body_, reference_.psi_v, pose).vertices);
}

Image ReferenceAvatarTargets::render(RenderMode mode, int pose_index, const CameraParams& camera) const {
    if (pose_index < -1 || pose_index >= static_cast<int>(poses_.size()))
        throw std::out_of_range("reference targets: pose index " + std::to_string(pose_index) + " out of range");
    const Points& verts = posed_[static_cast<std::size_t>(pose_index + 1)];
    if (mode == RenderMode::normal)
        return render_normal(verts, body_.faces, vertex_normals(verts, body_.faces), camera).image;
    return render_albedo(verts, body_.faces, body_.uv_coords, reference_.psi_a, camera).image;
}

GuidanceCondition ReferenceAvatarTargets::condition(RenderMode mode, int pose_index, const CameraParams& camera) const {
    GuidanceCondition c;
    c.target = std::make_shared<const Image>(render(mode, pose_index, camera));
    c.id = mode == RenderMode::normal ? "reference-normal" : "reference-albedo";
    return c;
}

namespace {

double mean_abs_diff(const Image& a, const Image& b) {
    if (a.data.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) sum += std::abs(a.data[i] - b.data[i]);
    return sum / static_cast<double>(a.data.size());
}

double target_error(const Image& render, const GuidanceCondition& cond) {
    if (!cond.target || !cond.target->same_shape(render)) return std::numeric_limits<double>::quiet_NaN();
    return mean_abs_diff(render, *cond.target);
}

JointRotations zero_pose(const ParametricBody& body) { return JointRotations::Zero(body.num_joints(), 3); }

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

std::span<double> as_span(Points& p) { return {p.data(), static_cast<std::size_t>(p.size())}; }
std::span<double> as_span(Image& im) { return {im.data}; }

std::string num(double v) { return std::isnan(v) ? "nan" : text::format_double(v); }

/// Shared per-stage bookkeeping: logging, checkpoints, the skip budget and
/// the stage transition.
class StageRun {
public:
    StageRun(Stage stage, TrainState& state, const TrainingConfig& config, const StageHooks& hooks)
        : stage_(stage), state_(state), config_(config), sc_(config.stage(stage)), hooks_(hooks) {
        if (state.stage != stage)
            throw TrainingError(std::string(stage_name(stage)) + " stage: training state is at stage " +
                                stage_name(state.stage));
        if (state.iteration == 0) {
            state.adam_v = AdamState{};
            state.adam_a = AdamState{};
            state.skipped = 0;
        }
    }

    const StageConfig& config() const { return sc_; }
    bool more() const { return state_.iteration < sc_.iterations; }

    void skip(const std::string& reason) {
        ++state_.skipped;
        if (hooks_.log)
            hooks_.log(std::string("skip stage=") + stage_name(stage_) + " iter=" + std::to_string(state_.iteration + 1) +
                       " reason=\"" + reason + "\"");
        if (state_.skipped * 100 > sc_.iterations)
            throw TrainingError(std::string(stage_name(stage_)) + " stage: " + std::to_string(state_.skipped) + " of " +
                                std::to_string(sc_.iterations) + " iterations skipped (limit 1%); last: " + reason);
    }

    /// Returns false when the interrupt hook asks the stage to stop.
    bool end_iteration(double eff_std, double sigma_v, double sigma_a, double image_err) {
        ++state_.iteration;
        const long long it = state_.iteration;
        if (hooks_.log && config_.log_every > 0 && (it % config_.log_every == 0 || it == sc_.iterations)) {
            std::ostringstream line;
            line << "stage=" << stage_name(stage_) << " iter=" << it << " eff_std=" << num(eff_std)
                 << " sigma_v=" << num(sigma_v) << " sigma_a=" << num(sigma_a) << " image_err=" << num(image_err);
            hooks_.log(line.str());
        }
        if (hooks_.iteration) hooks_.iteration(state_, image_err);
        if (hooks_.checkpoint && config_.checkpoint_every > 0 && it % config_.checkpoint_every == 0 &&
            it < sc_.iterations)
            hooks_.checkpoint(state_);
        return !(hooks_.interrupt && hooks_.interrupt(state_));
    }

    void finish() {
        state_.stage = static_cast<Stage>(static_cast<int>(stage_) + 1);
        state_.iteration = 0;
        state_.skipped = 0;
        state_.adam_v = AdamState{};
        state_.adam_a = AdamState{};
        if (hooks_.checkpoint) hooks_.checkpoint(state_);
    }

private:
    Stage stage_;
    TrainState& state_;
    const TrainingConfig& config_;
    const StageConfig& sc_;
    const StageHooks& hooks_;
};

/// Seam copies of a vertex share one offset: samples copy the representative's
/// row, gradients are summed over the copies and shared.
class SeamTies {
public:
    explicit SeamTies(const ParametricBody& body) : rep_(coincident_representatives(body.template_vertices)) {
        for (std::size_t v = 0; v < rep_.size(); ++v)
            if (rep_[v] != static_cast<int>(v)) copies_.push_back(static_cast<int>(v));
    }
    void tie_sample(Points& p) const {
        for (int v : copies_) p.row(v) = p.row(rep_[static_cast<std::size_t>(v)]);
    }
    void tie_gradient(Points& g) const {
        for (int v : copies_) g.row(rep_[static_cast<std::size_t>(v)]) += g.row(v);
        for (int v : copies_) g.row(v) = g.row(rep_[static_cast<std::size_t>(v)]);
    }

private:
    std::vector<int> rep_;
    std::vector<int> copies_;
};

/// Clips and applies one block update. False when the gradient is not finite.
template <typename Block, typename Grad>
bool apply_update(Block& block, Grad& grad, AdamState& adam, double lr, double clip) {
    auto g = as_span(grad);
    if (!all_finite(g)) return false;
    clip_global_norm(g, clip);
    adam_step(as_span(block), g, adam, lr);
    return true;
}

}  // namespace

TrainState run_geometry_stage(const ParametricBody& body, TrainState state, const TrainingConfig& config,
                              const GuidanceOracle& oracle, const ConditionSource& conditions,
                              const StageHooks& hooks) {
    StageRun run(Stage::geometry, state, config, hooks);
    const StageConfig& sc = run.config();
    const DiffusionSchedule schedule(config.schedule);
    const JointRotations rest = zero_pose(body);
    const CameraPolicy policy =
        make_camera_policy(sc, config, compute_anchors(body, pose_avatar(body, state.avatar.psi_v * 0.0, rest).vertices));
    const SeamTies ties(body);

    while (run.more()) {
        const CameraParams cam = sample_camera(policy, state.rng);
        const double sv = sigma(state.avatar.psi_v);
        const double sa = sigma(state.avatar.psi_a);
        Points offsets = sample_offsets(state.avatar, state.rng, sc.perturbation);
        ties.tie_sample(offsets);
        const PosedMesh mesh = pose_avatar(body, offsets, rest);
        const RenderOutput out = render_normal(mesh.vertices, body.faces, vertex_normals(mesh.vertices, body.faces), cam);
        const GuidanceCondition cond = conditions.condition(RenderMode::normal, -1, cam);
        const double err = target_error(out.image, cond);
        double eff = effective_noise_std(sc.noise_weights, sv, sa);
        try {
            const GuidanceResult g =
                asds_gradient(schedule, oracle, out.image, cond, sc.noise_weights, sv, sa, state.rng);
            eff = g.effective_std;
            Points grad = skinning_backward(body, mesh.transforms, backward_normal(out, g.pixel_grad));
            ties.tie_gradient(grad);
            if (!apply_update(state.avatar.psi_v, grad, state.adam_v, sc.lr_psi_v, sc.clip_norm))
                run.skip("non-finite offset gradient");
        } catch (const GuidanceError& e) {
            run.skip(e.what());
        }
        if (!run.end_iteration(eff, sv, sa, err)) return state;
    }
    run.finish();
    return state;
}

TrainState run_appearance_stage(const ParametricBody& body, TrainState state, const TrainingConfig& config,
                                const GuidanceOracle& oracle, const ConditionSource& conditions,
                                const StageHooks& hooks) {
    StageRun run(Stage::appearance, state, config, hooks);
    const StageConfig& sc = run.config();
    const DiffusionSchedule schedule(config.schedule);
    const PosedMesh mesh = pose_avatar(body, state.avatar.psi_v, zero_pose(body));
    const CameraPolicy policy = make_camera_policy(sc, config, compute_anchors(body, mesh.vertices));

    while (run.more()) {
        const CameraParams cam = sample_camera(policy, state.rng);
        const double sv = sigma(state.avatar.psi_v);
        const double sa = sigma(state.avatar.psi_a);
        const Image albedo = sample_albedo(state.avatar, state.rng, sc.perturbation);
        const RenderOutput out = render_albedo(mesh.vertices, body.faces, body.uv_coords, albedo, cam);
        const GuidanceCondition cond = conditions.condition(RenderMode::albedo, -1, cam);
        const double err = target_error(out.image, cond);
        double eff = effective_noise_std(sc.noise_weights, sv, sa);
        try {
            const GuidanceResult g =
                asds_gradient(schedule, oracle, out.image, cond, sc.noise_weights, sv, sa, state.rng);
            eff = g.effective_std;
            Image grad = backward_albedo(out, g.pixel_grad);
            if (!apply_update(state.avatar.psi_a, grad, state.adam_a, sc.lr_psi_a, sc.clip_norm))
                run.skip("non-finite albedo gradient");
        } catch (const GuidanceError& e) {
            run.skip(e.what());
        }
        if (!run.end_iteration(eff, sv, sa, err)) return state;
    }
    run.finish();
    return state;
}

AnimationGradients animation_gradients(const ParametricBody& body, const SkinningTransforms& transforms,
                                       const RenderOutput* normal_render, const Image* normal_grad,
                                       const RenderOutput* albedo_render, const Image* albedo_sample,
                                       const Image* albedo_grad, bool color_geometry_grad) {
    AnimationGradients r;
    r.psi_v_normal_path = Points::Zero(body.num_vertices(), 3);
    r.psi_v_color_path = Points::Zero(body.num_vertices(), 3);
    if (normal_render)
        r.psi_v_normal_path = skinning_backward(body, transforms, backward_normal(*normal_render, *normal_grad));
    if (albedo_render) {
        r.psi_a = backward_albedo(*albedo_render, *albedo_grad);
        if (color_geometry_grad)
            r.psi_v_color_path = skinning_backward(
                body, transforms, backward_albedo_geometry(*albedo_render, *albedo_sample, *albedo_grad));
    }
    r.psi_v = r.psi_v_normal_path + r.psi_v_color_path;
    return r;
}

TrainState run_animation_stage(const ParametricBody& body, TrainState state, const TrainingConfig& config,
                               const GuidanceOracle& oracle, const ConditionSource& conditions,
                               const PoseLibrary& poses, const StageHooks& hooks) {
    if (poses.size() == 0) throw ConfigError({"animation: pose library is empty"});
    validate(poses, body.num_joints());
    StageRun run(Stage::animation, state, config, hooks);
    const StageConfig& sc = run.config();
    const DiffusionSchedule schedule(config.schedule);
    const bool use_normal = sc.enabled_losses.geometry;
    const bool use_albedo = sc.enabled_losses.appearance;
    const bool update_v = use_normal || (use_albedo && sc.color_geometry_grad);

    const SeamTies ties(body);
    std::vector<CameraPolicy> policies;
    const Points no_offsets = Points::Zero(body.num_vertices(), 3);
    for (const auto& pose : poses.poses)
        policies.push_back(make_camera_policy(sc, config, compute_anchors(body, pose_avatar(body, no_offsets, pose).vertices)));

    while (run.more()) {
        const int p = static_cast<int>(state.rng.uniform_int(0, static_cast<std::int64_t>(poses.size()) - 1));
        const CameraParams cam = sample_camera(policies[static_cast<std::size_t>(p)], state.rng);
        PerturbedSample sample = sample_perturbed(state.avatar, state.rng, sc.perturbation);
        ties.tie_sample(sample.psi_v_sample);
        const PosedMesh mesh = pose_avatar(body, sample.psi_v_sample, poses.poses[static_cast<std::size_t>(p)]);

        double err = std::numeric_limits<double>::quiet_NaN();
        double eff = effective_noise_std(sc.noise_weights, sample.sigma_v, sample.sigma_a);
        try {
            RenderOutput normal_out, albedo_out;
            GuidanceResult normal_g, albedo_g;
            double err_sum = 0.0;
            int err_count = 0;
            if (use_normal) {
                normal_out = render_normal(mesh.vertices, body.faces, vertex_normals(mesh.vertices, body.faces), cam);
                const GuidanceCondition cond = conditions.condition(RenderMode::normal, p, cam);
                if (const double e = target_error(normal_out.image, cond); !std::isnan(e)) err_sum += e, ++err_count;
                normal_g = asds_gradient(schedule, oracle, normal_out.image, cond, sc.noise_weights, sample.sigma_v,
                                         sample.sigma_a, state.rng);
            }
            if (use_albedo) {
                albedo_out = render_albedo(mesh.vertices, body.faces, body.uv_coords, sample.psi_a_sample, cam);
                const GuidanceCondition cond = conditions.condition(RenderMode::albedo, p, cam);
                if (const double e = target_error(albedo_out.image, cond); !std::isnan(e)) err_sum += e, ++err_count;
                albedo_g = asds_gradient(schedule, oracle, albedo_out.image, cond, sc.noise_weights, sample.sigma_v,
                                         sample.sigma_a, state.rng);
            }
            if (err_count > 0) err = err_sum / err_count;
            AnimationGradients grads = animation_gradients(
                body, mesh.transforms, use_normal ? &normal_out : nullptr, use_normal ? &normal_g.pixel_grad : nullptr,
                use_albedo ? &albedo_out : nullptr, use_albedo ? &sample.psi_a_sample : nullptr,
                use_albedo ? &albedo_g.pixel_grad : nullptr, sc.color_geometry_grad);
            ties.tie_gradient(grads.psi_v);
            const bool finite = all_finite(as_span(grads.psi_v)) && (!use_albedo || all_finite(as_span(grads.psi_a)));
            if (!finite) {
                run.skip("non-finite animation gradient");
            } else {
                if (update_v) apply_update(state.avatar.psi_v, grads.psi_v, state.adam_v, sc.lr_psi_v, sc.clip_norm);
                if (use_albedo)
                    apply_update(state.avatar.psi_a, grads.psi_a, state.adam_a, sc.lr_psi_a, sc.clip_norm);
            }
        } catch (const GuidanceError& e) {
            run.skip(e.what());
        }
        if (!run.end_iteration(eff, sample.sigma_v, sample.sigma_a, err)) return state;
    }
    run.finish();
    return state;
}

double evaluate_image_error(const ParametricBody& body, const AvatarParams& avatar, const ReferenceAvatarTargets& targets,
                            RenderMode mode, int pose_index, const std::vector<CameraParams>& views,
                            const PoseLibrary& poses) {
    const JointRotations pose =
        pose_index < 0 ? zero_pose(body) : poses.poses.at(static_cast<std::size_t>(pose_index));
    const PosedMesh mesh = pose_avatar(body, avatar.psi_v, pose);
    const Points normals = vertex_normals(mesh.vertices, body.faces);
    double total = 0.0;
    for (const auto& cam : views) {
        const Image img = mode == RenderMode::normal
                              ? render_normal(mesh.vertices, body.faces, normals, cam).image
                              : render_albedo(mesh.vertices, body.faces, body.uv_coords, avatar.psi_a, cam).image;
        total += mean_abs_diff(img, targets.render(mode, pose_index, cam));
    }
    return views.empty() ? 0.0 : total / static_cast<double>(views.size());
}

}  // namespace forge
