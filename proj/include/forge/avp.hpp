#pragma once

#include <cstdint>
#include <span>

#include "forge/rng.hpp"
#include "forge/types.hpp"

namespace forge {

/// Trainable avatar parameters: per-vertex offsets and the albedo map. These
/// are the means of the perturbation distribution; samples are drawn around
/// them each iteration.
struct AvatarParams {
    Points psi_v;  // N x 3 vertex offsets, canonical space
    Image psi_a;   // albedo map
    std::uint64_t rng_seed = 0;

    /// Zero offsets and a uniform 0.5 albedo.
    static AvatarParams initial(int num_vertices, int albedo_width, int albedo_height, std::uint64_t seed = 0);

    bool operator==(const AvatarParams&) const = default;
};

/// Population standard deviation over every scalar of a block.
double sigma(std::span<const double> block);
double sigma(const Points& block);
double sigma(const Image& block);

enum class PerturbationMode {
    adaptive,  // std = sigma(block)
    fixed,     // std = lambda_v / lambda_a from the config
};

struct PerturbationConfig {
    PerturbationMode mode = PerturbationMode::adaptive;
    double fixed_lambda_v = 0.0;
    double fixed_lambda_a = 0.0;
    bool operator==(const PerturbationConfig&) const = default;
};

struct PerturbedSample {
    Points psi_v_sample;
    Image psi_a_sample;
    double sigma_v = 0.0;  // sigma(psi_v) of the means at draw time
    double sigma_a = 0.0;
};

/// Draws psi_v' = psi_v + s_v * eps and psi_a' = clamp(psi_a + s_a * eps, 0, 1).
/// Offsets are drawn first, then the albedo. A block whose std is zero
/// consumes no random numbers and is returned as an exact copy.
PerturbedSample sample_perturbed(const AvatarParams& params, Rng& rng, const PerturbationConfig& config = {});

/// Offsets only (geometry stage).
Points sample_offsets(const AvatarParams& params, Rng& rng, const PerturbationConfig& config = {});
/// Albedo only (appearance stage).
Image sample_albedo(const AvatarParams& params, Rng& rng, const PerturbationConfig& config = {});

struct InferenceView {
    const Points& psi_v;
    const Image& psi_a;
};

/// The stored means, unperturbed.
inline InferenceView inference_params(const AvatarParams& params) { return {params.psi_v, params.psi_a}; }

}  // namespace forge
