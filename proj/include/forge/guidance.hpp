#pragma once

#include <memory>
#include <string>

#include "forge/schedule.hpp"

namespace forge {

/// Mixing weights of the avatar-aware noise: base noise, offset-std term and
/// albedo-std term.
struct NoiseWeights {
    double lambda_n = 0.8;
    double lambda_v = 0.1;
    double lambda_a = 0.1;
    bool operator==(const NoiseWeights&) const = default;
};

/// What the oracle is conditioned on: a target image for the analytic oracle,
/// or an opaque id (a prompt, resolved server-side) for a remote one.
struct GuidanceCondition {
    std::shared_ptr<const Image> target;
    std::string id;
};

/// Epsilon predictor: given a noised image z_t at timestep t, estimate the
/// noise it contains.
class GuidanceOracle {
public:
    virtual ~GuidanceOracle() = default;
    /// Must return an image of the same shape with finite values. Throws
    /// GuidanceError on transport or server failure.
    virtual Image predict(const Image& noised, int t, const GuidanceCondition& condition) const = 0;
};

/// Closed-form oracle for a known target x*: predicts
/// (z_t - sqrt(alpha_bar_t) x*) / sqrt(1 - alpha_bar_t), the exact noise if the
/// clean image were x*. Distillation against it descends toward x*.
class AnalyticTargetOracle final : public GuidanceOracle {
public:
    /// `fallback_target` is used when a condition carries no target.
    explicit AnalyticTargetOracle(DiffusionSchedule schedule, std::shared_ptr<const Image> fallback_target = nullptr);
    Image predict(const Image& noised, int t, const GuidanceCondition& condition) const override;

private:
    DiffusionSchedule schedule_;
    std::shared_ptr<const Image> fallback_;
};

std::unique_ptr<GuidanceOracle> analytic_target_oracle(const DiffusionSchedule& schedule, Image target);

/// sqrt(lambda_n^2 + (lambda_v sigma_v)^2 + (lambda_a sigma_a)^2).
double effective_noise_std(const NoiseWeights& weights, double sigma_v, double sigma_a);

struct AvatarNoise {
    Image epsilon;  // effective_std * standard normal, per entry
    double effective_std = 0.0;
};

/// Avatar-aware noise in its collapsed single-Gaussian form.
AvatarNoise compose_avatar_noise(const NoiseWeights& weights, double sigma_v, double sigma_a, Rng& rng, int width,
                                 int height);

struct GuidanceResult {
    Image pixel_grad;
    int timestep = 0;
    double effective_std = 1.0;
};

/// Single-sample distillation gradient w(t) (eps_hat(z_t; y, t) - eps) with
/// z_t = forward_noise(x0, t, eps). Draws t first, then eps row-major.
GuidanceResult sds_gradient(const DiffusionSchedule& schedule, const GuidanceOracle& oracle, const Image& x0,
                            const GuidanceCondition& condition, Rng& rng);

/// Avatar-aware variant: the injected noise is compose_avatar_noise(...) and
/// the residual is taken against it. With lambda = (1, 0, 0) the random draws
/// and the result are bit-identical to sds_gradient.
GuidanceResult asds_gradient(const DiffusionSchedule& schedule, const GuidanceOracle& oracle, const Image& x0,
                             const GuidanceCondition& condition, const NoiseWeights& weights, double sigma_v,
                             double sigma_a, Rng& rng);

/// Residual step shared by both estimators, for a caller-chosen t and noise.
Image distillation_residual(const DiffusionSchedule& schedule, const GuidanceOracle& oracle, const Image& x0,
                            const GuidanceCondition& condition, int t, const Image& noise);

}  // namespace forge
