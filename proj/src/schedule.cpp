#include "forge/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace forge {

DiffusionSchedule::DiffusionSchedule(const ScheduleConfig& config)
    : DiffusionSchedule(
          [&config] {
              if (config.num_steps < 1) throw std::invalid_argument("schedule: num_steps must be >= 1");
              std::vector<double> alphas(static_cast<std::size_t>(config.num_steps));
              for (int i = 0; i < config.num_steps; ++i) {
                  const double frac = config.num_steps == 1 ? 0.0 : static_cast<double>(i) / (config.num_steps - 1);
                  alphas[static_cast<std::size_t>(i)] = 1.0 - (config.beta_start + frac * (config.beta_end - config.beta_start));
              }
              return alphas;
          }(),
          config) {}

DiffusionSchedule DiffusionSchedule::from_alphas(const std::vector<double>& alphas, const ScheduleConfig& config) {
    ScheduleConfig c = config;
    c.num_steps = static_cast<int>(alphas.size());
    return DiffusionSchedule(alphas, c);
}

DiffusionSchedule::DiffusionSchedule(std::vector<double> alphas, const ScheduleConfig& config)
    : alphas_(std::move(alphas)), config_(config) {
    if (alphas_.empty()) throw std::invalid_argument("schedule: no steps");
    alpha_bars_.resize(alphas_.size());
    double running = 1.0;
    for (std::size_t i = 0; i < alphas_.size(); ++i) {
        if (!(alphas_[i] > 0.0 && alphas_[i] < 1.0))
            throw std::invalid_argument("schedule: alpha_" + std::to_string(i + 1) + " must lie in (0, 1)");
        running *= alphas_[i];
        alpha_bars_[i] = running;
    }
    const int T = num_steps();
    if (!(config_.t_min_fraction >= 0.0 && config_.t_min_fraction <= config_.t_max_fraction &&
          config_.t_max_fraction <= 1.0))
        throw std::invalid_argument("schedule: timestep fractions must satisfy 0 <= min <= max <= 1");
    // The tolerance keeps 0.02 * 1000 from rounding up to 21.
    t_min_ = std::max(1, static_cast<int>(std::ceil(config_.t_min_fraction * T - 1e-9)));
    t_max_ = std::min(T, static_cast<int>(std::floor(config_.t_max_fraction * T + 1e-9)));
    if (t_max_ < t_min_) throw std::invalid_argument("schedule: empty timestep range");
}

double DiffusionSchedule::alpha(int t) const {
    if (t < 1 || t > num_steps()) throw std::out_of_range("schedule: timestep " + std::to_string(t) + " out of range");
    return alphas_[static_cast<std::size_t>(t - 1)];
}

double DiffusionSchedule::alpha_bar(int t) const {
    if (t < 1 || t > num_steps()) throw std::out_of_range("schedule: timestep " + std::to_string(t) + " out of range");
    return alpha_bars_[static_cast<std::size_t>(t - 1)];
}

double DiffusionSchedule::weight(int t) const {
    return config_.weighting == Weighting::constant ? 1.0 : 1.0 - alpha_bar(t);
}

int sample_timestep(const DiffusionSchedule& schedule, Rng& rng) {
    return static_cast<int>(rng.uniform_int(schedule.t_min(), schedule.t_max()));
}

Image forward_noise(const DiffusionSchedule& schedule, const Image& x0, int t, const Image& epsilon) {
    if (!x0.same_shape(epsilon)) throw std::invalid_argument("forward_noise: epsilon shape differs from x0");
    const double ab = schedule.alpha_bar(t);
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    Image z(x0.width, x0.height);
    for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] = a * x0.data[i] + b * epsilon.data[i];
    return z;
}

}  // namespace forge
