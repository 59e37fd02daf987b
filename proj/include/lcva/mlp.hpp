#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lcva/errors.hpp"
#include "lcva/matrix.hpp"
#include "lcva/rng.hpp"

namespace lcva {

// Fully connected net with ReLU hidden layers and an identity output layer.
// weights[l] has shape layer_dims[l+1] x layer_dims[l].
struct MlpNet {
    std::vector<std::size_t> layer_dims;
    std::vector<Matrix> weights;
    std::vector<Vec> biases;

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }
    std::size_t layer_count() const { return weights.size(); }
};

inline MlpNet make_mlp(std::vector<std::size_t> dims) {
    if (dims.size() < 2) throw ShapeError("make_mlp: need at least input and output dims");
    for (std::size_t d : dims) {
        if (d == 0) throw ShapeError("make_mlp: zero layer dimension");
    }
    MlpNet net;
    net.layer_dims = std::move(dims);
    for (std::size_t l = 0; l + 1 < net.layer_dims.size(); ++l) {
        net.weights.emplace_back(net.layer_dims[l + 1], net.layer_dims[l]);
        net.biases.emplace_back(net.layer_dims[l + 1], 0.0);
    }
    return net;
}

// Centered uniform init scaled by 1/sqrt(fan_in); biases stay zero.
inline void init_uniform_fan_in(MlpNet& net, SeededRng& rng) {
    for (auto& w : net.weights) {
        const double a = 1.0 / std::sqrt(static_cast<double>(w.cols()));
        for (double& x : w.data()) x = rng.uniform(-a, a);
    }
}

inline std::size_t param_count(const MlpNet& net) {
    std::size_t n = 0;
    for (const auto& w : net.weights) n += w.size();
    for (const auto& b : net.biases) n += b.size();
    return n;
}

// Forward-pass intermediates needed by the backward pass.
// activations[0] is the input; activations[l+1] is layer l's post-activation.
struct MlpTrace {
    std::vector<Vec> activations;
    std::vector<Vec> preacts;
};

inline Vec mlp_forward_trace(const MlpNet& net, const Vec& x, MlpTrace& trace) {
    if (x.size() != net.input_dim()) {
        throw ShapeError("mlp_forward: input length " + std::to_string(x.size()) +
                         " != " + std::to_string(net.input_dim()));
    }
    trace.activations.assign(1, x);
    trace.preacts.clear();
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Vec pre = matvec(net.weights[l], trace.activations.back());
        axpy(pre, 1.0, net.biases[l]);
        trace.preacts.push_back(pre);
        if (l + 1 < net.layer_count()) {
            for (double& v : pre) v = v > 0.0 ? v : 0.0;  // ReLU on hidden layers
        }
        trace.activations.push_back(std::move(pre));
    }
    return trace.activations.back();
}

inline Vec mlp_forward(const MlpNet& net, const Vec& x) {
    MlpTrace trace;
    return mlp_forward_trace(net, x, trace);
}

// Gradient container shape-matching an MlpNet.
struct MlpGrads {
    std::vector<Matrix> weights;
    std::vector<Vec> biases;
};

inline MlpGrads zeros_like(const MlpNet& net) {
    MlpGrads g;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        g.weights.emplace_back(net.weights[l].rows(), net.weights[l].cols());
        g.biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

// Accumulates scale * d(upstream . output)/dparam into grads.
// Returns the gradient with respect to the input (also scaled).
inline Vec mlp_backward_accumulate(const MlpNet& net, const MlpTrace& trace, const Vec& upstream,
                                   MlpGrads& grads, double scale = 1.0) {
    if (upstream.size() != net.output_dim()) {
        throw ShapeError("mlp_backward: upstream length " + std::to_string(upstream.size()) +
                         " != " + std::to_string(net.output_dim()));
    }
    Vec delta = upstream;
    for (std::size_t l = net.layer_count(); l-- > 0;) {
        add_outer(grads.weights[l], delta, trace.activations[l], scale);
        axpy(grads.biases[l], scale, delta);
        delta = matvec_transpose(net.weights[l], delta);
        if (l > 0) {
            const Vec& pre = trace.preacts[l - 1];
            for (std::size_t j = 0; j < delta.size(); ++j) {
                if (pre[j] <= 0.0) delta[j] = 0.0;
            }
        }
    }
    if (scale != 1.0) {
        for (double& v : delta) v *= scale;
    }
    return delta;
}

struct MlpBackwardResult {
    MlpGrads grads;
    Vec input_grad;
};

// One-shot gradients of (upstream . output) for every weight, bias and the input.
inline MlpBackwardResult mlp_backward(const MlpNet& net, const Vec& x, const Vec& upstream) {
    MlpTrace trace;
    mlp_forward_trace(net, x, trace);
    MlpBackwardResult result{zeros_like(net), {}};
    result.input_grad = mlp_backward_accumulate(net, trace, upstream, result.grads);
    return result;
}

}  // namespace lcva
