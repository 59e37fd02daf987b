#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lcva/errors.hpp"
#include "lcva/matrix.hpp"

namespace lcva {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam over one flat parameter vector. Structured parameter
// sets are exposed to it as an ordered list of spans (see adam_step below).
struct AdamState {
    AdamConfig config;
    std::size_t step_count = 0;
    Vec first_moment;
    Vec second_moment;

    explicit AdamState(std::size_t n, AdamConfig cfg = {})
        : config(cfg), first_moment(n, 0.0), second_moment(n, 0.0) {}

    std::size_t size() const { return first_moment.size(); }
};

namespace detail {

inline void adam_apply(AdamState& state, std::size_t offset, std::span<double> params,
                       std::span<const double> grads, double corr1, double corr2) {
    const auto& c = state.config;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        if (!std::isfinite(g)) {
            throw NumericError("adam_step: non-finite gradient at parameter index " +
                               std::to_string(offset + i));
        }
        double& m = state.first_moment[offset + i];
        double& v = state.second_moment[offset + i];
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        const double m_hat = m / corr1;
        const double v_hat = v / corr2;
        params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

}  // namespace detail

// In-place update of a flat parameter array.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != state.size()) {
        throw ShapeError("adam_step: params/grads/state size mismatch");
    }
    state.step_count += 1;
    const double corr1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(state.step_count));
    const double corr2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.step_count));
    detail::adam_apply(state, 0, params, grads, corr1, corr2);
}

// Update over an ordered list of parameter segments (one optimizer step).
inline void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
                      const std::vector<std::span<const double>>& grads) {
    if (params.size() != grads.size()) {
        throw ShapeError("adam_step: segment count mismatch");
    }
    std::size_t total = 0;
    for (const auto& p : params) total += p.size();
    if (total != state.size()) {
        throw ShapeError("adam_step: total parameter count " + std::to_string(total) +
                         " != state size " + std::to_string(state.size()));
    }
    state.step_count += 1;
    const double corr1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(state.step_count));
    const double corr2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.step_count));
    std::size_t offset = 0;
    for (std::size_t s = 0; s < params.size(); ++s) {
        if (params[s].size() != grads[s].size()) {
            throw ShapeError("adam_step: segment " + std::to_string(s) + " size mismatch");
        }
        detail::adam_apply(state, offset, params[s], grads[s], corr1, corr2);
        offset += params[s].size();
    }
}

}  // namespace lcva
