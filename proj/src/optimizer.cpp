#include "forge/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace forge {

void adam_step(std::span<double> block, std::span<const double> grad, AdamState& state, double lr,
               const AdamConfig& c) {
    if (block.size() != grad.size()) throw std::invalid_argument("adam_step: block and gradient sizes differ");
    if (state.m.size() != block.size()) state.reset(block.size());
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < block.size(); ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grad[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        block[i] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

double clip_global_norm(std::span<double> grad, double max_norm) {
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (double& g : grad) g *= s;
    }
    return norm;
}

}  // namespace forge
