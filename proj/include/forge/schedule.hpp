#pragma once

#include <vector>

#include "forge/rng.hpp"
#include "forge/types.hpp"

namespace forge {

/// Timestep weighting applied to the distillation gradient.
enum class Weighting {
    constant,             // w(t) = 1
    one_minus_alpha_bar,  // w(t) = 1 - alpha_bar_t
};

struct ScheduleConfig {
    int num_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    double t_min_fraction = 0.02;
    double t_max_fraction = 0.98;
    Weighting weighting = Weighting::constant;
    bool operator==(const ScheduleConfig&) const = default;
};

/// Discrete diffusion schedule, timesteps 1..T. alpha_bar(t) is the running
/// product of alpha(1..t).
class DiffusionSchedule {
public:
    /// Linear beta schedule from the config.
    explicit DiffusionSchedule(const ScheduleConfig& config = {});
    /// Explicit per-step alphas, each in (0, 1).
    static DiffusionSchedule from_alphas(const std::vector<double>& alphas, const ScheduleConfig& config = {});

    int num_steps() const { return static_cast<int>(alphas_.size()); }
    double alpha(int t) const;
    double alpha_bar(int t) const;
    double weight(int t) const;
    /// Inclusive sampling range: [ceil(t_min_fraction * T), floor(t_max_fraction * T)].
    int t_min() const { return t_min_; }
    int t_max() const { return t_max_; }
    const ScheduleConfig& config() const { return config_; }

private:
    DiffusionSchedule(std::vector<double> alphas, const ScheduleConfig& config);

    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;
    ScheduleConfig config_;
    int t_min_ = 1;
    int t_max_ = 1;
};

/// Uniform integer timestep in [t_min, t_max].
int sample_timestep(const DiffusionSchedule& schedule, Rng& rng);

/// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * epsilon. Throws
/// std::out_of_range for t outside 1..T.
Image forward_noise(const DiffusionSchedule& schedule, const Image& x0, int t, const Image& epsilon);

}  // namespace forge
