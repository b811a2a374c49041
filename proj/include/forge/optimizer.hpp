#pragma once

#include <span>
#include <vector>

namespace forge {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moments for one parameter block, plus its step count.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long long step = 0;

    void reset(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
    bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update of `block` in place. Sizes moments on
/// first use.
void adam_step(std::span<double> block, std::span<const double> grad, AdamState& state, double lr,
               const AdamConfig& config = {});

/// Rescales `grad` so its L2 norm is at most `max_norm`. Returns the norm
/// before clipping.
double clip_global_norm(std::span<double> grad, double max_norm);

}  // namespace forge
