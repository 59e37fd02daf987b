#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lcva/mlp.hpp"
#include "lcva/rng.hpp"

using namespace lcva;

namespace {

// Central finite difference of f at *p with step h.
template <typename F>
double central_diff(double* p, double h, F&& f) {
    const double saved = *p;
    *p = saved + h;
    const double hi = f();
    *p = saved - h;
    const double lo = f();
    *p = saved;
    return (hi - lo) / (2.0 * h);
}

bool close_rel(double got, double want, double rel, double abs_floor) {
    return std::abs(got - want) <= std::max(abs_floor, rel * std::abs(want));
}

}  // namespace

TEST_CASE("all-zero weights pass the bias through") {
    MlpNet net = make_mlp({3, 2});
    net.biases[0] = {0.5, -1.0};
    REQUIRE(mlp_forward(net, {7, -2, 3}) == Vec{0.5, -1.0});
}

TEST_CASE("single linear layer is a plain matrix product") {
    MlpNet net = make_mlp({2, 2});
    net.weights[0] = Matrix(2, 2, {2, 0, 0, 3});
    REQUIRE(mlp_forward(net, {1, 1}) == Vec{2, 3});
}

TEST_CASE("ReLU clamps all-negative hidden preactivations") {
    MlpNet net = make_mlp({2, 3, 2});
    for (double& w : net.weights[0].data()) w = -1.0;  // hidden preacts < 0 for positive x
    net.biases[1] = {0.25, -0.75};
    SeededRng rng(3);
    for (double& w : net.weights[1].data()) w = rng.uniform(-1, 1);
    REQUIRE(mlp_forward(net, {1.0, 2.0}) == Vec{0.25, -0.75});
}

TEST_CASE("forward rejects wrong input length") {
    MlpNet net = make_mlp({3, 2});
    REQUIRE_THROWS_AS(mlp_forward(net, {1, 2}), ShapeError);
    REQUIRE_THROWS_AS(make_mlp({4}), ShapeError);
    REQUIRE_THROWS_AS(make_mlp({4, 0, 2}), ShapeError);
}

TEST_CASE("zero upstream gradient zeroes every gradient") {
    SeededRng rng(1);
    MlpNet net = make_mlp({3, 4, 2});
    init_uniform_fan_in(net, rng);
    const auto result = mlp_backward(net, {1, 2, 3}, {0, 0});
    for (const auto& w : result.grads.weights) {
        for (double g : w.data()) REQUIRE(g == 0.0);
    }
    for (const auto& b : result.grads.biases) {
        for (double g : b) REQUIRE(g == 0.0);
    }
    for (double g : result.input_grad) REQUIRE(g == 0.0);
}

TEST_CASE("linear layer gradient is the outer product with the input") {
    MlpNet net = make_mlp({2, 2});
    net.weights[0] = Matrix(2, 2, {1, 0, 0, 1});
    const Vec x{3.0, -4.0};
    const auto result = mlp_backward(net, x, {1.0, 0.0});
    // row selected by upstream e1 = x^T, other row zero
    REQUIRE(result.grads.weights[0](0, 0) == 3.0);
    REQUIRE(result.grads.weights[0](0, 1) == -4.0);
    REQUIRE(result.grads.weights[0](1, 0) == 0.0);
    REQUIRE(result.grads.weights[0](1, 1) == 0.0);
    REQUIRE(result.grads.biases[0] == Vec{1.0, 0.0});
    REQUIRE(result.input_grad == Vec{1.0, 0.0});
}

TEST_CASE("analytic gradients match central finite differences on random nets") {
    SeededRng rng(2024);
    int checked = 0;
    for (int trial = 0; trial < 40 && checked < 8; ++trial) {
        std::vector<std::size_t> dims;
        const std::size_t n_layers = 2 + rng.next_below(2);  // 2..3 weight layers
        dims.push_back(1 + rng.next_below(6));
        for (std::size_t l = 0; l + 1 < n_layers; ++l) dims.push_back(1 + rng.next_below(16));
        dims.push_back(1 + rng.next_below(4));

        MlpNet net = make_mlp(dims);
        init_uniform_fan_in(net, rng);
        Vec x(net.input_dim());
        for (double& v : x) v = rng.uniform(-1.5, 1.5);
        Vec upstream(net.output_dim());
        for (double& v : upstream) v = rng.uniform(-1, 1);

        // Skip instances with a hidden preactivation near the ReLU kink,
        // where a central difference is not a valid derivative estimate.
        MlpTrace trace;
        mlp_forward_trace(net, x, trace);
        bool near_kink = false;
        for (std::size_t l = 0; l + 1 < net.layer_count(); ++l) {
            for (double pre : trace.preacts[l]) near_kink = near_kink || std::abs(pre) < 1e-3;
        }
        if (near_kink) continue;
        ++checked;

        const auto result = mlp_backward(net, x, upstream);
        auto objective = [&] { return dot(upstream, mlp_forward(net, x)); };

        const double h = 1e-5;
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            for (std::size_t i = 0; i < net.weights[l].size(); ++i) {
                const double fd = central_diff(&net.weights[l].data()[i], h, objective);
                REQUIRE(close_rel(result.grads.weights[l].data()[i], fd, 1e-4, 1e-6));
            }
            for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
                const double fd = central_diff(&net.biases[l][i], h, objective);
                REQUIRE(close_rel(result.grads.biases[l][i], fd, 1e-4, 1e-6));
            }
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double fd = central_diff(&x[i], h, objective);
            REQUIRE(close_rel(result.input_grad[i], fd, 1e-4, 1e-6));
        }
    }
    REQUIRE(checked == 8);
}

TEST_CASE("init_uniform_fan_in stays within the fan-in bound") {
    SeededRng rng(5);
    MlpNet net = make_mlp({9, 4, 2});
    init_uniform_fan_in(net, rng);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(net.weights[l].cols()));
        for (double w : net.weights[l].data()) {
            REQUIRE(std::abs(w) <= bound);
        }
    }
}
