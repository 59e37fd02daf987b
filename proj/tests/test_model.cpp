#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lcva/checkpoint.hpp"
#include "lcva/model.hpp"
#include "lcva/prob.hpp"
#include "lcva/rng.hpp"
#include "lcva/synthetic.hpp"

using namespace lcva;

namespace {

LcvaConfig toy_config(std::size_t d, std::size_t k, std::size_t h, std::size_t hl,
                      std::size_t mc_samples, std::uint64_t seed, bool spillover = true) {
    LcvaConfig c;
    c.feature_dim = d;
    c.latent_dim = k;
    c.hidden_dim = h;
    c.hidden_layers = hl;
    c.mc_samples = mc_samples;
    c.seed = seed;
    c.spillover_enabled = spillover;
    return c;
}

PairObs random_obs(SeededRng& rng, std::size_t d) {
    PairObs obs;
    obs.x_u.resize(d);
    obs.x_v.resize(d);
    for (double& v : obs.x_u) v = rng.uniform(-1.5, 1.5);
    for (double& v : obs.x_v) v = rng.uniform(-1.5, 1.5);
    obs.t_u = static_cast<double>(rng.bernoulli(0.5));
    obs.t_v = static_cast<double>(rng.bernoulli(0.5));
    obs.y_u = rng.normal();
    return obs;
}

double elbo_objective(const LcvaParams& params, const LcvaConfig& config, const PairObs& obs,
                      std::uint64_t noise_seed) {
    SeededRng rng(noise_seed);
    LcvaGrads sink = zeros_like(params);
    return elbo_pair_accumulate(params, config, obs, rng, sink, 1.0).objective();
}

// Finite differences are only trustworthy away from ReLU kinks and logistic
// clamps. This walks every forward pass the ELBO makes (same inputs, same
// noise stream) and reports the worst-case margins.
bool fd_safe_instance(const LcvaParams& params, const LcvaConfig& config, const PairObs& obs,
                      std::uint64_t noise_seed) {
    constexpr double kPreactMargin = 1e-3;
    constexpr double kLogitLimit = 14.0;
    bool safe = true;
    auto check_hidden = [&](const MlpNet& net, const Vec& input) {
        MlpTrace trace;
        const Vec out = mlp_forward_trace(net, input, trace);
        for (std::size_t l = 0; l + 1 < net.layer_count(); ++l) {
            for (double pre : trace.preacts[l]) safe = safe && std::abs(pre) > kPreactMargin;
        }
        return out;
    };

    const Vec x_v = config.spillover_enabled ? obs.x_v : Vec(obs.x_v.size(), 0.0);
    const double t_v = config.spillover_enabled ? obs.t_v : 0.0;
    Vec enc_in = obs.x_u;
    enc_in.insert(enc_in.end(), x_v.begin(), x_v.end());
    enc_in.push_back(obs.t_u);
    enc_in.push_back(t_v);
    enc_in.push_back(obs.y_u);

    const Vec trunk_out = check_hidden(params.encoder_shared, enc_in);
    const MlpNet& head = obs.t_u != 0.0 ? params.encoder_head_t1 : params.encoder_head_t0;
    const Vec head_out = check_hidden(head, trunk_out);

    const std::size_t k = config.latent_dim;
    PosteriorMoments moments;
    moments.mu.assign(head_out.begin(), head_out.begin() + static_cast<long>(k));
    moments.sigma.resize(k);
    for (std::size_t j = 0; j < k; ++j) moments.sigma[j] = softplus(head_out[k + j]) + kSigmaFloor;

    SeededRng rng(noise_seed);
    for (std::size_t l = 0; l < config.mc_samples; ++l) {
        Vec z(k);
        for (std::size_t j = 0; j < k; ++j) {
            z[j] = moments.mu[j] + moments.sigma[j] * rng.normal();
        }
        check_hidden(params.dec_x_net, z);
        const double t_logit = check_hidden(params.dec_t_net, z)[0];
        safe = safe && std::abs(t_logit) < kLogitLimit;
        Vec zy = z;
        zy.push_back(t_v);
        check_hidden(obs.t_u != 0.0 ? params.dec_y_head_t1 : params.dec_y_head_t0, zy);
    }
    safe = safe && std::abs(check_hidden(params.aux_t_net, obs.x_u)[0]) < kLogitLimit;
    safe = safe && std::abs(check_hidden(params.aux_t_net, x_v)[0]) < kLogitLimit;
    Vec aux_in = obs.x_u;
    aux_in.insert(aux_in.end(), x_v.begin(), x_v.end());
    aux_in.push_back(obs.t_u);
    aux_in.push_back(t_v);
    check_hidden(params.aux_y_net, aux_in);
    return safe;
}

bool close_rel(double got, double want, double rel, double abs_floor) {
    return std::abs(got - want) <= std::max(abs_floor, rel * std::abs(want));
}

// Zero-weight parameter set whose decoder reproduces the observation at the
// mode and whose posterior is exactly the prior.
LcvaParams handcrafted_params(const LcvaConfig& config, const PairObs& obs) {
    SeededRng rng(0);
    LcvaParams p = init_lcva_params(config, rng);
    auto zero_net = [](MlpNet& net) {
        for (auto& w : net.weights) std::fill(w.data().begin(), w.data().end(), 0.0);
        for (auto& b : net.biases) std::fill(b.begin(), b.end(), 0.0);
    };
    zero_net(p.encoder_shared);
    zero_net(p.encoder_head_t0);
    zero_net(p.encoder_head_t1);
    zero_net(p.aux_t_net);
    zero_net(p.aux_y_net);
    zero_net(p.dec_x_net);
    zero_net(p.dec_t_net);
    zero_net(p.dec_y_head_t0);
    zero_net(p.dec_y_head_t1);

    const double raw_unit_sigma = std::log(std::expm1(1.0 - kSigmaFloor));
    const std::size_t k = config.latent_dim;
    const std::size_t d = config.feature_dim;
    // posterior mu = 0, sigma = 1 from either arm head
    for (std::size_t j = 0; j < k; ++j) {
        p.encoder_head_t0.biases.back()[k + j] = raw_unit_sigma;
        p.encoder_head_t1.biases.back()[k + j] = raw_unit_sigma;
    }
    // decoder reconstructs x and y exactly at the mode with unit sigma
    for (std::size_t j = 0; j < d; ++j) {
        p.dec_x_net.biases.back()[j] = obs.x_u[j];
        p.dec_x_net.biases.back()[d + j] = raw_unit_sigma;
    }
    p.dec_y_head_t0.biases.back()[0] = obs.y_u;
    p.dec_y_head_t1.biases.back()[0] = obs.y_u;
    p.aux_y_net.biases.back()[0] = obs.y_u;
    return p;
}

}  // namespace

TEST_CASE("encode_posterior: ego treatment selects the arm head") {
    const auto config = toy_config(3, 2, 8, 2, 1, 5);
    SeededRng rng(7);
    LcvaParams params = init_lcva_params(config, rng);
    PairObs obs = random_obs(rng, 3);

    for (int t_u : {0, 1}) {
        const auto moments = encode_posterior(params, config, obs.x_u, obs.x_v, t_u,
                                              static_cast<int>(obs.t_v), obs.y_u);
        // manual recomputation through the public MLP API
        Vec enc_in = obs.x_u;
        enc_in.insert(enc_in.end(), obs.x_v.begin(), obs.x_v.end());
        enc_in.push_back(t_u);
        enc_in.push_back(obs.t_v);
        enc_in.push_back(obs.y_u);
        const Vec trunk = mlp_forward(params.encoder_shared, enc_in);
        const Vec head_out =
            mlp_forward(t_u == 1 ? params.encoder_head_t1 : params.encoder_head_t0, trunk);
        for (std::size_t j = 0; j < 2; ++j) {
            REQUIRE(moments.mu[j] == head_out[j]);
            REQUIRE(moments.sigma[j] == softplus(head_out[2 + j]) + kSigmaFloor);
            REQUIRE(moments.sigma[j] > 0.0);
        }
    }
}

TEST_CASE("encode_posterior: identical heads make the switch invisible") {
    const auto config = toy_config(2, 2, 6, 1, 1, 3);
    SeededRng rng(11);
    LcvaParams params = init_lcva_params(config, rng);
    params.encoder_head_t0 = params.encoder_head_t1;
    const PairObs obs = random_obs(rng, 2);
    const auto m0 = encode_posterior(params, config, obs.x_u, obs.x_v, 0,
                                     static_cast<int>(obs.t_v), obs.y_u);
    const auto m1 = encode_posterior(params, config, obs.x_u, obs.x_v, 1,
                                     static_cast<int>(obs.t_v), obs.y_u);
    REQUIRE(m0.mu == m1.mu);
    REQUIRE(m0.sigma == m1.sigma);
}

TEST_CASE("spillover disabled: posterior ignores peer inputs entirely") {
    const auto config = toy_config(2, 2, 6, 1, 1, 3, /*spillover=*/false);
    SeededRng rng(13);
    LcvaParams params = init_lcva_params(config, rng);
    const PairObs obs = random_obs(rng, 2);
    const auto base = encode_posterior(params, config, obs.x_u, obs.x_v, 1,
                                       static_cast<int>(obs.t_v), obs.y_u);
    const auto other = encode_posterior(params, config, obs.x_u, {99.0, -42.0}, 1,
                                        static_cast<int>(1 - obs.t_v), obs.y_u);
    REQUIRE(base.mu == other.mu);
    REQUIRE(base.sigma == other.sigma);
}

TEST_CASE("decode_x_log_prob: mode value and per-coordinate factorization") {
    const auto config = toy_config(1, 2, 4, 1, 1, 1);
    PairObs obs;
    obs.x_u = {0.7};
    obs.x_v = {0.0};
    obs.y_u = 0.0;
    const LcvaParams params = handcrafted_params(config, obs);
    const double lp = decode_x_log_prob(params, {0.1, -0.3}, obs.x_u);
    REQUIRE_THAT(lp, Catch::Matchers::WithinAbs(-0.9189385332046727, 1e-9));

    // d=2: joint equals the sum of independent per-coordinate terms
    const auto config2 = toy_config(2, 2, 6, 2, 1, 9);
    SeededRng rng(21);
    const LcvaParams p2 = init_lcva_params(config2, rng);
    const Vec z{0.4, -1.2};
    const Vec x{0.3, 2.0};
    const Vec out = mlp_forward(p2.dec_x_net, z);
    double want = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
        const double sigma = softplus(out[2 + j]) + kSigmaFloor;
        const double var = sigma * sigma;
        want += -0.5 * std::log(2.0 * M_PI * var) - (x[j] - out[j]) * (x[j] - out[j]) / (2 * var);
    }
    REQUIRE_THAT(decode_x_log_prob(p2, z, x), Catch::Matchers::WithinAbs(want, 1e-12));
}

TEST_CASE("decode_t_log_prob: zero logit, unit logit, and clamp saturation") {
    const auto config = toy_config(1, 2, 4, 1, 1, 1);
    PairObs obs;
    obs.x_u = {0.0};
    obs.x_v = {0.0};
    LcvaParams params = handcrafted_params(config, obs);
    REQUIRE_THAT(decode_t_log_prob(params, {0.0, 0.0}, 1),
                 Catch::Matchers::WithinAbs(std::log(0.5), 1e-12));
    REQUIRE_THAT(decode_t_log_prob(params, {0.0, 0.0}, 0),
                 Catch::Matchers::WithinAbs(std::log(0.5), 1e-12));

    params.dec_t_net.biases.back()[0] = 1.0;  // g1(z) = 1
    REQUIRE_THAT(decode_t_log_prob(params, {0.0, 0.0}, 1),
                 Catch::Matchers::WithinAbs(std::log(logistic(1.0)), 1e-12));

    params.dec_t_net.biases.back()[0] = 1e6;  // saturates past the clamp
    REQUIRE(decode_t_log_prob(params, {0.0, 0.0}, 1) == std::log(kProbClampHi));
    REQUIRE(decode_t_log_prob(params, {0.0, 0.0}, 0) == std::log1p(-kProbClampHi));
}

TEST_CASE("decode_y: identical heads, spillover switch, hand computation") {
    const auto config = toy_config(1, 1, 2, 1, 1, 1);
    PairObs obs;
    obs.x_u = {0.0};
    obs.x_v = {0.0};
    LcvaParams params = handcrafted_params(config, obs);

    params.dec_y_head_t0.biases.back()[0] = 4.0;
    params.dec_y_head_t1.biases.back()[0] = 4.0;
    const auto [mu0, sy0] = decode_y(params, config, {0.5}, 0, 1);
    const auto [mu1, sy1] = decode_y(params, config, {0.5}, 1, 1);
    REQUIRE(mu0 == mu1);
    REQUIRE_THAT(sy0, Catch::Matchers::WithinAbs(1.0, 1e-12));

    // hand-built head: hidden = [relu(z), relu(t_v)], out = 2*h0 + 5*h1 + 0.5
    params.dec_y_head_t1.weights[0] = Matrix(2, 2, {1, 0, 0, 1});
    params.dec_y_head_t1.weights[1] = Matrix(1, 2, {2, 5});
    params.dec_y_head_t1.biases[1] = {0.5};
    REQUIRE_THAT(decode_y(params, config, {0.3}, 1, 1).first,
                 Catch::Matchers::WithinAbs(2 * 0.3 + 5 * 1.0 + 0.5, 1e-12));
    REQUIRE_THAT(decode_y(params, config, {0.3}, 1, 0).first,
                 Catch::Matchers::WithinAbs(2 * 0.3 + 0.5, 1e-12));

    // spillover disabled: t_v is zeroed before the head sees it
    auto cevae = config;
    cevae.spillover_enabled = false;
    REQUIRE(decode_y(params, cevae, {0.3}, 1, 1).first ==
            decode_y(params, cevae, {0.3}, 1, 0).first);
}

TEST_CASE("elbo on a perfectly reconstructing model: KL=0 and mode log-probs") {
    const auto config = toy_config(2, 3, 4, 1, 4, 2);
    PairObs obs;
    obs.x_u = {0.8, -0.4};
    obs.x_v = {0.1, 0.2};
    obs.t_u = 1.0;
    obs.t_v = 0.0;
    obs.y_u = 1.7;
    const LcvaParams params = handcrafted_params(config, obs);
    SeededRng rng(77);
    const auto result = elbo_pair(params, config, obs, rng);

    const double mode_gauss = -0.9189385332046727;
    REQUIRE_THAT(result.terms.kl, Catch::Matchers::WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(result.terms.recon_x, Catch::Matchers::WithinAbs(2 * mode_gauss, 1e-9));
    REQUIRE_THAT(result.terms.recon_t, Catch::Matchers::WithinAbs(std::log(0.5), 1e-12));
    REQUIRE_THAT(result.terms.recon_y, Catch::Matchers::WithinAbs(mode_gauss, 1e-9));
    REQUIRE_THAT(result.terms.aux_t_ego, Catch::Matchers::WithinAbs(std::log(0.5), 1e-12));
    REQUIRE_THAT(result.terms.aux_t_peer, Catch::Matchers::WithinAbs(std::log(0.5), 1e-12));
    REQUIRE_THAT(result.terms.aux_y, Catch::Matchers::WithinAbs(mode_gauss, 1e-9));
    REQUIRE_THAT(result.objective(),
                 Catch::Matchers::WithinAbs(4 * mode_gauss + 3 * std::log(0.5), 1e-8));
}

TEST_CASE("elbo Monte-Carlo noise shrinks roughly like 1/sqrt(L)") {
    const auto config_small = toy_config(2, 2, 6, 1, 4, 31);
    auto config_large = config_small;
    config_large.mc_samples = 400;
    SeededRng rng(19);
    const LcvaParams params = init_lcva_params(const_cast<LcvaConfig&>(config_small), rng);
    const PairObs obs = random_obs(rng, 2);

    auto spread = [&](const LcvaConfig& cfg) {
        double sum = 0.0, sum_sq = 0.0;
        const int m = 40;
        for (int i = 0; i < m; ++i) {
            const double obj = elbo_objective(params, cfg, obs, 1000 + i);
            sum += obj;
            sum_sq += obj * obj;
        }
        const double mean = sum / m;
        return std::sqrt(std::max(0.0, sum_sq / m - mean * mean));
    };
    const double sd_small = spread(config_small);
    const double sd_large = spread(config_large);
    // expected ratio sqrt(400/4) = 10
    REQUIRE(sd_small / sd_large > 4.0);
    REQUIRE(sd_small / sd_large < 25.0);
}

TEST_CASE("elbo gradients match finite differences on toy instances") {
    SeededRng meta(404);
    int checked = 0;
    for (std::uint64_t attempt = 0; attempt < 60 && checked < 3; ++attempt) {
        const std::size_t d = 2;
        const std::size_t k = 2;
        const auto config = toy_config(d, k, 6, 1, checked == 2 ? 3 : 1, 500 + attempt,
                                       /*spillover=*/attempt % 2 == 0);
        SeededRng rng(600 + attempt);
        LcvaParams params = init_lcva_params(config, rng);
        const PairObs obs = random_obs(rng, d);
        const std::uint64_t noise_seed = 700 + attempt;
        if (!fd_safe_instance(params, config, obs, noise_seed)) continue;
        ++checked;

        SeededRng grad_rng(noise_seed);
        const auto result = elbo_pair(params, config, obs, grad_rng);
        LcvaGrads grads = std::move(const_cast<ElboResult&>(result).grads);

        auto p_spans = param_spans(params);
        const auto g_spans = grad_spans(grads);
        const double h = 1e-5;
        for (std::size_t s = 0; s < p_spans.size(); ++s) {
            for (std::size_t i = 0; i < p_spans[s].size(); ++i) {
                double& ref = p_spans[s][i];
                const double saved = ref;
                ref = saved + h;
                const double hi = elbo_objective(params, config, obs, noise_seed);
                ref = saved - h;
                const double lo = elbo_objective(params, config, obs, noise_seed);
                ref = saved;
                const double fd = (hi - lo) / (2.0 * h);
                REQUIRE(close_rel(g_spans[s][i], fd, 1e-4, 1e-6));
            }
        }
    }
    REQUIRE(checked == 3);
}

TEST_CASE("elbo gradients of the unselected arm heads are exactly zero") {
    const auto config = toy_config(2, 2, 6, 1, 2, 8);
    SeededRng rng(15);
    LcvaParams params = init_lcva_params(config, rng);
    PairObs obs = random_obs(rng, 2);
    obs.t_u = 1.0;
    SeededRng noise(3);
    const auto result = elbo_pair(params, config, obs, noise);

    auto all_zero = [](const MlpGrads& g) {
        for (const auto& w : g.weights) {
            for (double v : w.data()) {
                if (v != 0.0) return false;
            }
        }
        for (const auto& b : g.biases) {
            for (double v : b) {
                if (v != 0.0) return false;
            }
        }
        return true;
    };
    REQUIRE(all_zero(result.grads.encoder_head_t0));
    REQUIRE(all_zero(result.grads.dec_y_head_t0));
    REQUIRE_FALSE(all_zero(result.grads.encoder_head_t1));
    REQUIRE_FALSE(all_zero(result.grads.dec_y_head_t1));
}

TEST_CASE("elbo with spillover disabled ignores peer perturbations") {
    const auto config = toy_config(2, 2, 6, 1, 2, 8, /*spillover=*/false);
    SeededRng rng(23);
    LcvaParams params = init_lcva_params(config, rng);
    PairObs obs = random_obs(rng, 2);
    PairObs perturbed = obs;
    perturbed.x_v = {321.0, -5.0};
    perturbed.t_v = 1.0 - obs.t_v;

    SeededRng r1(9), r2(9);
    const auto a = elbo_pair(params, config, obs, r1);
    const auto b = elbo_pair(params, config, perturbed, r2);
    REQUIRE(a.objective() == b.objective());
}

TEST_CASE("elbo reports non-finite terms by name") {
    const auto config = toy_config(2, 2, 4, 1, 1, 8);
    SeededRng rng(2);
    LcvaParams params = init_lcva_params(config, rng);
    params.dec_x_net.biases.back()[0] = std::nan("");
    const PairObs obs = random_obs(rng, 2);
    SeededRng noise(1);
    LcvaGrads sink = zeros_like(params);
    REQUIRE_THROWS_WITH(elbo_pair_accumulate(params, config, obs, noise, sink, 1.0),
                        Catch::Matchers::ContainsSubstring("recon_x"));
}

TEST_CASE("fit: zero epochs returns initialized params and an empty trace") {
    GeneratorSpec spec;
    spec.n_units = 20;
    spec.feature_dim = 3;
    spec.seed = 2;
    const auto ds = generate_synthetic_spillover(spec);
    auto config = toy_config(3, 2, 6, 1, 1, 10);
    config.epochs = 0;
    const auto result = fit(ds.data, config);
    REQUIRE(result.epoch_objectives.empty());

    SeededRng rng(config.seed);
    const LcvaParams expected = init_lcva_params(config, rng);
    REQUIRE(result.params.encoder_shared.weights[0].data() ==
            expected.encoder_shared.weights[0].data());
    REQUIRE(result.params.sigma_y_raw == expected.sigma_y_raw);
}

TEST_CASE("fit: identical seeds give bitwise-identical parameters") {
    GeneratorSpec spec;
    spec.n_units = 40;
    spec.feature_dim = 2;
    spec.seed = 6;
    const auto ds = generate_synthetic_spillover(spec);
    auto config = toy_config(2, 2, 6, 1, 1, 10);
    config.epochs = 3;
    config.batch_size = 16;

    const auto a = fit(ds.data, config);
    const auto b = fit(ds.data, config);
    const TrainedEstimator ea{EstimatorKind::Lcva, VaeModel{config, a.params, a.epoch_objectives}};
    const TrainedEstimator eb{EstimatorKind::Lcva, VaeModel{config, b.params, b.epoch_objectives}};
    REQUIRE(checkpoint_to_json(ea).dump() == checkpoint_to_json(eb).dump());
}

TEST_CASE("fit improves the objective on synthetic linear-Gaussian data") {
    GeneratorSpec spec;
    spec.n_units = 120;
    spec.feature_dim = 3;
    spec.latent_dim = 2;
    spec.noise_sd = 0.5;
    spec.seed = 14;
    const auto ds = generate_synthetic_spillover(spec);

    auto config = toy_config(3, 4, 16, 1, 1, 31);
    config.epochs = 40;
    config.batch_size = 32;
    config.learning_rate = 2e-3;
    const auto result = fit(ds.data, config);
    REQUIRE(result.epoch_objectives.size() == 40);
    // final-epoch mean objective beats the first epoch
    REQUIRE(result.epoch_objectives.back() > result.epoch_objectives.front());
    // nondecreasing trend over the last half, up to tolerance
    for (std::size_t e = 20; e + 1 < result.epoch_objectives.size(); ++e) {
        REQUIRE(result.epoch_objectives[e + 1] >= result.epoch_objectives[e] - 1e-3);
    }
}

TEST_CASE("fit aborts with epoch/batch context when the objective diverges") {
    GeneratorSpec spec;
    spec.n_units = 30;
    spec.feature_dim = 2;
    spec.seed = 3;
    const auto ds = generate_synthetic_spillover(spec);
    auto config = toy_config(2, 2, 6, 1, 1, 10);
    config.epochs = 4;
    config.batch_size = 8;
    config.learning_rate = 1e100;  // guaranteed blow-up
    REQUIRE_THROWS_WITH(fit(ds.data, config), Catch::Matchers::ContainsSubstring("epoch"));
}
