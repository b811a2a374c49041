#include "forge/avp.hpp"

#include <algorithm>
#include <cmath>

namespace forge {
namespace {

double perturbation_std(double block_sigma, double fixed_lambda, const PerturbationConfig& config) {
    return config.mode == PerturbationMode::adaptive ? block_sigma : fixed_lambda;
}

}  // namespace

AvatarParams AvatarParams::initial(int num_vertices, int albedo_width, int albedo_height, std::uint64_t seed) {
    AvatarParams p;
    p.psi_v = Points::Zero(num_vertices, 3);
    p.psi_a = Image(albedo_width, albedo_height, 0.5);
    p.rng_seed = seed;
    return p;
}

double sigma(std::span<const double> block) {
    if (block.empty()) return 0.0;
    const double n = static_cast<double>(block.size());
    double mean = 0.0;
    for (double v : block) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : block) var += (v - mean) * (v - mean);
    return std::sqrt(var / n);
}

double sigma(const Points& block) { return sigma(std::span<const double>(block.data(), static_cast<std::size_t>(block.size()))); }
double sigma(const Image& block) { return sigma(std::span<const double>(block.data)); }

Points sample_offsets(const AvatarParams& params, Rng& rng, const PerturbationConfig& config) {
    const double s = perturbation_std(sigma(params.psi_v), config.fixed_lambda_v, config);
    Points out = params.psi_v;
    if (s == 0.0) return out;
    double* d = out.data();
    for (Eigen::Index i = 0; i < out.size(); ++i) d[i] += s * rng.normal();
    return out;
}

Image sample_albedo(const AvatarParams& params, Rng& rng, const PerturbationConfig& config) {
    const double s = perturbation_std(sigma(params.psi_a), config.fixed_lambda_a, config);
    Image out = params.psi_a;
    if (s == 0.0) return out;
    for (double& v : out.data) v = std::clamp(v + s * rng.normal(), 0.0, 1.0);
    return out;
}

PerturbedSample sample_perturbed(const AvatarParams& params, Rng& rng, const PerturbationConfig& config) {
    PerturbedSample s;
    s.sigma_v = sigma(params.psi_v);
    s.sigma_a = sigma(params.psi_a);
    s.psi_v_sample = sample_offsets(params, rng, config);
    s.psi_a_sample = sample_albedo(params, rng, config);
    return s;
}

}  // namespace forge
