#include "forge/guidance.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace forge {

AnalyticTargetOracle::AnalyticTargetOracle(DiffusionSchedule schedule, std::shared_ptr<const Image> fallback_target)
    : schedule_(std::move(schedule)), fallback_(std::move(fallback_target)) {}

Image AnalyticTargetOracle::predict(const Image& noised, int t, const GuidanceCondition& condition) const {
    const Image* target = condition.target ? condition.target.get() : fallback_.get();
    if (!target) throw std::invalid_argument("analytic oracle: no target image");
    if (!target->same_shape(noised)) throw std::invalid_argument("analytic oracle: target shape differs from the render");
    const double ab = schedule_.alpha_bar(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    Image eps(noised.width, noised.height);
    for (std::size_t i = 0; i < eps.data.size(); ++i) eps.data[i] = (noised.data[i] - a * target->data[i]) / b;
    return eps;
}

std::unique_ptr<GuidanceOracle> analytic_target_oracle(const DiffusionSchedule& schedule, Image target) {
    return std::make_unique<AnalyticTargetOracle>(schedule, std::make_shared<const Image>(std::move(target)));
}

double effective_noise_std(const NoiseWeights& w, double sigma_v, double sigma_a) {
    if (sigma_v < 0.0 || sigma_a < 0.0) throw std::invalid_argument("effective_noise_std: negative sigma");
    const double v = w.lambda_v * sigma_v;
    const double a = w.lambda_a * sigma_a;
    return std::sqrt(w.lambda_n * w.lambda_n + v * v + a * a);
}

AvatarNoise compose_avatar_noise(const NoiseWeights& weights, double sigma_v, double sigma_a, Rng& rng, int width,
                                 int height) {
    AvatarNoise noise;
    noise.effective_std = effective_noise_std(weights, sigma_v, sigma_a);
    noise.epsilon = Image(width, height);
    for (double& v : noise.epsilon.data) v = noise.effective_std * rng.normal();
    return noise;
}

Image distillation_residual(const DiffusionSchedule& schedule, const GuidanceOracle& oracle, const Image& x0,
                            const GuidanceCondition& condition, int t, const Image& noise) {
    const Image z = forward_noise(schedule, x0, t, noise);
    Image eps_hat;
    try {
        eps_hat = oracle.predict(z, t, condition);
    } catch (const GuidanceError& e) {
        throw GuidanceError(std::string("guidance oracle failed at t=") + std::to_string(t) + ": " + e.what());
    }
    if (!eps_hat.same_shape(x0)) throw GuidanceError("guidance oracle returned an image of the wrong shape");
    const double w = schedule.weight(t);
    Image grad(x0.width, x0.height);
    for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] = w * (eps_hat.data[i] - noise.data[i]);
    return grad;
}

GuidanceResult sds_gradient(const DiffusionSchedule& schedule, const GuidanceOracle& oracle, const Image& x0,
                            const GuidanceCondition& condition, Rng& rng) {
    GuidanceResult r;
    r.timestep = sample_timestep(schedule, rng);
    Image eps(x0.width, x0.height);
    for (double& v : eps.data) v = rng.normal();
    r.pixel_grad = distillation_residual(schedule, oracle, x0, condition, r.timestep, eps);
    r.effective_std = 1.0;
    return r;
}

GuidanceResult asds_gradient(const DiffusionSchedule& schedule, const GuidanceOracle& oracle, const Image& x0,
                             const GuidanceCondition& condition, const NoiseWeights& weights, double sigma_v,
                             double sigma_a, Rng& rng) {
    GuidanceResult r;
    r.timestep = sample_timestep(schedule, rng);
    AvatarNoise noise = compose_avatar_noise(weights, sigma_v, sigma_a, rng, x0.width, x0.height);
    r.pixel_grad = distillation_residual(schedule, oracle, x0, condition, r.timestep, noise.epsilon);
    r.effective_std = noise.effective_std;
    return r;
}

}  // namespace forge
