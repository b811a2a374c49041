#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "forge/avp.hpp"
#include "forge/body_io.hpp"
#include "forge/body_model.hpp"
#include "forge/camera.hpp"
#include "forge/guidance.hpp"
#include "forge/optimizer.hpp"
#include "forge/renderer.hpp"
#include "forge/rng.hpp"
#include "forge/schedule.hpp"

namespace forge {

enum class Stage { geometry = 0, appearance = 1, animation = 2, done = 3 };

const char* stage_name(Stage s);
/// Throws std::invalid_argument for unknown names.
Stage parse_stage(const std::string& name);

/// Which images the stage renders and distills.
struct EnabledLosses {
    bool geometry = true;    // normal image, drives psi_v
    bool appearance = true;  // albedo image, drives psi_a
    bool operator==(const EnabledLosses&) const = default;
};

struct StageConfig {
    int iterations = 0;
    double lr_psi_v = 1e-4;
    double lr_psi_a = 5e-3;
    NoiseWeights noise_weights;
    double head_probability = 0.2;
    ViewRange body_view;
    ViewRange head_view{-90.0, 90.0, -10.0, 20.0, 0.7, 0.9, 40.0};
    EnabledLosses enabled_losses;
    PerturbationConfig perturbation;
    double clip_norm = 1.0;
    /// Animation stage: also pull psi_v through the albedo render's uv lookup.
    /// Off by default; unlit albedo carries no shading dependence on geometry.
    bool color_geometry_grad = false;

    /// Every violated constraint, each prefixed with `prefix` (the section).
    std::vector<std::string> check(const std::string& prefix) const;
    /// Throws ConfigError when check() finds anything.
    void validate(const std::string& prefix) const;
    bool operator==(const StageConfig&) const = default;
};

struct TrainingConfig {
    StageConfig geometry;
    StageConfig appearance;
    StageConfig animation;
    ScheduleConfig schedule;
    int render_width = 800;
    int render_height = 800;
    int albedo_width = 2048;
    int albedo_height = 2048;
    int checkpoint_every = 500;
    int log_every = 100;

    /// Published hyper-parameters: 5000 / 10000 / 5000 iterations, learning
    /// rates 1e-4 (offsets) and 5e-3 (albedo), noise weights (0.8, 0.1, 0.1),
    /// head-render probability 0.2, 800 x 800 renders, 2048 x 2048 albedo.
    static TrainingConfig defaults();

    const StageConfig& stage(Stage s) const;
    StageConfig& stage(Stage s);
    bool operator==(const TrainingConfig&) const = default;
};

/// Everything needed to continue training bit-exactly.
struct TrainState {
    AvatarParams avatar;
    AdamState adam_v;
    AdamState adam_a;
    Stage stage = Stage::geometry;
    long long iteration = 0;  // completed iterations of the current stage
    long long skipped = 0;    // skipped iterations of the current stage
    Rng rng;

    static TrainState initial(const ParametricBody& body, const TrainingConfig& config, std::uint64_t seed);
    bool operator==(const TrainState&) const = default;
};

/// Supplies the oracle condition for each rendered image. `pose_index` is -1
/// for the canonical pose.
class ConditionSource {
public:
    virtual ~ConditionSource() = default;
    virtual GuidanceCondition condition(RenderMode mode, int pose_index, const CameraParams& camera) const = 0;
};

/// The same condition for every view: an id for remote oracles, or a single
/// target image.
class FixedCondition final : public ConditionSource {
public:
    FixedCondition(GuidanceCondition normal, GuidanceCondition albedo)
        : normal_(std::move(normal)), albedo_(std::move(albedo)) {}
    explicit FixedCondition(GuidanceCondition both) : normal_(both), albedo_(std::move(both)) {}
    GuidanceCondition condition(RenderMode mode, int, const CameraParams&) const override {
        return mode == RenderMode::normal ? normal_ : albedo_;
    }

private:
    GuidanceCondition normal_, albedo_;
};

/// Targets rendered from a known reference avatar at the requested pose and
/// camera. With the analytic oracle this makes the reference a fixed point of
/// training.
class ReferenceAvatarTargets final : public ConditionSource {
public:
    ReferenceAvatarTargets(const ParametricBody& body, AvatarParams reference, PoseLibrary poses = {});
    GuidanceCondition condition(RenderMode mode, int pose_index, const CameraParams& camera) const override;
    Image render(RenderMode mode, int pose_index, const CameraParams& camera) const;
    const AvatarParams& reference() const { return reference_; }

private:
    ParametricBody body_;
    AvatarParams reference_;
    PoseLibrary poses_;
    std::vector<Points> posed_;  // index 0 canonical, then one per library pose
};

/// Smooth synthetic avatar for self-consistent targets: per-axis sinusoidal
/// offsets of the given amplitude, and a smooth colour field over uv.
AvatarParams make_reference_avatar(const ParametricBody& body, int albedo_width, int albedo_height,
                                   double offset_amplitude, std::uint64_t seed);

/// Camera look-at points for a mesh: bounding-box centre and the centroid of
/// the vertices bound mostly to the head joint.
struct ViewAnchors {
    Vector3d body = Vector3d::Zero();
    Vector3d head = Vector3d::Zero();
};
ViewAnchors compute_anchors(const ParametricBody& body, const Points& vertices);

CameraPolicy make_camera_policy(const StageConfig& stage, const TrainingConfig& config, const ViewAnchors& anchors);

/// `count` body cameras evenly spaced in azimuth at mid elevation and
/// distance. Used for evaluation.
std::vector<CameraParams> evaluation_views(const CameraPolicy& policy, int count);

/// Posed mesh of the avatar for given offsets: blend shapes at zero
/// coefficients plus `offsets`, skinned to `pose`.
struct PosedMesh {
    Points vertices;
    SkinningTransforms transforms;
};
PosedMesh pose_avatar(const ParametricBody& body, const Points& offsets, const JointRotations& pose);

/// Mean absolute pixel difference between renders of the avatar means and the
/// targets, averaged over `views`.
double evaluate_image_error(const ParametricBody& body, const AvatarParams& avatar, const ReferenceAvatarTargets& targets,
                            RenderMode mode, int pose_index, const std::vector<CameraParams>& views,
                            const PoseLibrary& poses = {});

struct StageHooks {
    /// One structured line per log interval.
    std::function<void(const std::string&)> log;
    /// Called every checkpoint interval and once at the stage boundary.
    std::function<void(const TrainState&)> checkpoint;
    /// Optional per-iteration observer (after the update).
    std::function<void(const TrainState&, double image_err)> iteration;
    /// When set and true after an iteration, the stage returns early without
    /// advancing (used to simulate interruption).
    std::function<bool(const TrainState&)> interrupt;
};

/// Offsets only: normal renders at the canonical pose.
TrainState run_geometry_stage(const ParametricBody& body, TrainState state, const TrainingConfig& config,
                              const GuidanceOracle& oracle, const ConditionSource& conditions,
                              const StageHooks& hooks = {});

/// Albedo only: albedo renders at the canonical pose with the mean offsets.
TrainState run_appearance_stage(const ParametricBody& body, TrainState state, const TrainingConfig& config,
                                const GuidanceOracle& oracle, const ConditionSource& conditions,
                                const StageHooks& hooks = {});

/// Both blocks: a random library pose per iteration, normal and albedo
/// renders from one camera. Throws ConfigError for an empty library.
TrainState run_animation_stage(const ParametricBody& body, TrainState state, const TrainingConfig& config,
                               const GuidanceOracle& oracle, const ConditionSource& conditions,
                               const PoseLibrary& poses, const StageHooks& hooks = {});

/// Parameter gradients of one animation iteration, kept per path.
struct AnimationGradients {
    Points psi_v_normal_path;  // normal image -> positions -> offsets
    Points psi_v_color_path;   // albedo image -> positions -> offsets
    Points psi_v;              // sum of the two
    Image psi_a;
};
/// Pulls pixel gradients of a posed normal render and a posed albedo render
/// back to the parameter blocks. Either render may be null when its loss is
/// disabled.
AnimationGradients animation_gradients(const ParametricBody& body, const SkinningTransforms& transforms,
                                       const RenderOutput* normal_render, const Image* normal_grad,
                                       const RenderOutput* albedo_render, const Image* albedo_sample,
                                       const Image* albedo_grad, bool color_geometry_grad);

}  // namespace forge
