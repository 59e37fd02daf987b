#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lcva/adam.hpp"
#include "lcva/dataset.hpp"
#include "lcva/errors.hpp"
#include "lcva/matrix.hpp"
#include "lcva/mlp.hpp"
#include "lcva/prob.hpp"
#include "lcva/rng.hpp"

namespace lcva {

struct LcvaConfig {
    std::size_t feature_dim = 0;
    std::size_t latent_dim = 20;
    std::size_t hidden_dim = 64;
    std::size_t hidden_layers = 2;
    double learning_rate = 1e-3;
    std::size_t epochs = 200;
    std::size_t batch_size = 128;
    std::size_t mc_samples = 1;
    std::uint64_t seed = 0;
    // false reduces the model to CEVAE: every peer input (x_v, t_v) is
    // replaced by zeros throughout encoder, decoder and auxiliary terms.
    bool spillover_enabled = true;

    void validate() const {
        if (feature_dim == 0) throw UsageError("config: feature_dim must be positive");
        if (latent_dim == 0) throw UsageError("config: latent_dim must be at least 1");
        if (hidden_dim == 0) throw UsageError("config: hidden_dim must be positive");
        if (hidden_layers == 0) throw UsageError("config: hidden_layers must be at least 1");
        if (!(learning_rate > 0.0)) throw UsageError("config: learning_rate must be positive");
        if (batch_size == 0) throw UsageError("config: batch_size must be positive");
        if (mc_samples == 0) throw UsageError("config: mc_samples must be at least 1");
    }
};

// Per-unit latent Gaussian after treatment-arm switching.
struct PosteriorMoments {
    Vec mu;
    Vec sigma;
};

// All encoder, auxiliary and decoder networks.
//
// Encoder: a shared trunk reads [x_u, x_v, t_v, y_u]; the ego treatment
// conditions the posterior purely by selecting which arm head emits
// (mu, raw sigma), so identical heads make t_u invisible. Auxiliaries realize
// q(t|x) and q(y|x_u, x_v, t_u, t_v). Decoder heads realize p(x|z),
// p(t|z) and the treatment-switched outcome mean on [z, t_v].
struct LcvaParams {
    MlpNet encoder_shared;
    MlpNet encoder_head_t0;
    MlpNet encoder_head_t1;
    MlpNet aux_t_net;
    MlpNet aux_y_net;
    MlpNet dec_x_net;
    MlpNet dec_t_net;
    MlpNet dec_y_head_t1;  // g2, active arm t_u = 1
    MlpNet dec_y_head_t0;  // g3, active arm t_u = 0
    double sigma_y_raw = 0.0;  // outcome noise: sigma_y = softplus(raw) + floor
};

namespace detail {

inline std::vector<std::size_t> stack_dims(std::size_t in, std::size_t hidden,
                                           std::size_t hidden_layers, std::size_t out) {
    std::vector<std::size_t> dims{in};
    dims.insert(dims.end(), hidden_layers, hidden);
    dims.push_back(out);
    return dims;
}

inline double inverse_softplus(double y) { return std::log(std::expm1(y)); }

}  // namespace detail

inline LcvaParams init_lcva_params(const LcvaConfig& config, SeededRng& rng) {
    config.validate();
    const std::size_t d = config.feature_dim;
    const std::size_t k = config.latent_dim;
    const std::size_t h = config.hidden_dim;
    const std::size_t hl = config.hidden_layers;

    LcvaParams p;
    p.encoder_shared = make_mlp(detail::stack_dims(2 * d + 2, h, hl > 1 ? hl - 1 : 0, h));
    p.encoder_head_t0 = make_mlp(detail::stack_dims(h, h, 1, 2 * k));
    p.encoder_head_t1 = make_mlp(detail::stack_dims(h, h, 1, 2 * k));
    p.aux_t_net = make_mlp(detail::stack_dims(d, h, hl, 1));
    p.aux_y_net = make_mlp(detail::stack_dims(2 * d + 2, h, hl, 1));
    p.dec_x_net = make_mlp(detail::stack_dims(k, h, hl, 2 * d));
    p.dec_t_net = make_mlp(detail::stack_dims(k, h, hl, 1));
    p.dec_y_head_t1 = make_mlp(detail::stack_dims(k + 1, h, hl, 1));
    p.dec_y_head_t0 = make_mlp(detail::stack_dims(k + 1, h, hl, 1));
    // learned outcome noise starts at exactly 1.0 after softplus + floor
    p.sigma_y_raw = detail::inverse_softplus(1.0 - kSigmaFloor);

    init_uniform_fan_in(p.encoder_shared, rng);
    init_uniform_fan_in(p.encoder_head_t0, rng);
    init_uniform_fan_in(p.encoder_head_t1, rng);
    init_uniform_fan_in(p.aux_t_net, rng);
    init_uniform_fan_in(p.aux_y_net, rng);
    init_uniform_fan_in(p.dec_x_net, rng);
    init_uniform_fan_in(p.dec_t_net, rng);
    init_uniform_fan_in(p.dec_y_head_t1, rng);
    init_uniform_fan_in(p.dec_y_head_t0, rng);
    return p;
}

namespace detail {

template <typename Params, typename Fn>
void visit_param_arrays(Params& p, Fn&& fn) {
    auto visit_net = [&](auto& net) {
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            fn(net.weights[l].data());
            fn(net.biases[l]);
        }
    };
    visit_net(p.encoder_shared);
    visit_net(p.encoder_head_t0);
    visit_net(p.encoder_head_t1);
    visit_net(p.aux_t_net);
    visit_net(p.aux_y_net);
    visit_net(p.dec_x_net);
    visit_net(p.dec_t_net);
    visit_net(p.dec_y_head_t1);
    visit_net(p.dec_y_head_t0);
}

}  // namespace detail

// Gradient mirror of LcvaParams.
struct LcvaGrads {
    MlpGrads encoder_shared;
    MlpGrads encoder_head_t0;
    MlpGrads encoder_head_t1;
    MlpGrads aux_t_net;
    MlpGrads aux_y_net;
    MlpGrads dec_x_net;
    MlpGrads dec_t_net;
    MlpGrads dec_y_head_t1;
    MlpGrads dec_y_head_t0;
    double sigma_y_raw = 0.0;
};

inline LcvaGrads zeros_like(const LcvaParams& p) {
    return LcvaGrads{zeros_like(p.encoder_shared), zeros_like(p.encoder_head_t0),
                     zeros_like(p.encoder_head_t1), zeros_like(p.aux_t_net),
                     zeros_like(p.aux_y_net),       zeros_like(p.dec_x_net),
                     zeros_like(p.dec_t_net),       zeros_like(p.dec_y_head_t1),
                     zeros_like(p.dec_y_head_t0),   0.0};
}

inline void zero_grads(LcvaGrads& g) {
    auto zero_net = [](MlpGrads& net) {
        for (auto& w : net.weights) std::fill(w.data().begin(), w.data().end(), 0.0);
        for (auto& b : net.biases) std::fill(b.begin(), b.end(), 0.0);
    };
    zero_net(g.encoder_shared);
    zero_net(g.encoder_head_t0);
    zero_net(g.encoder_head_t1);
    zero_net(g.aux_t_net);
    zero_net(g.aux_y_net);
    zero_net(g.dec_x_net);
    zero_net(g.dec_t_net);
    zero_net(g.dec_y_head_t1);
    zero_net(g.dec_y_head_t0);
    g.sigma_y_raw = 0.0;
}

inline std::vector<std::span<double>> param_spans(LcvaParams& p) {
    std::vector<std::span<double>> spans;
    detail::visit_param_arrays(p, [&](Vec& v) { spans.emplace_back(v); });
    spans.emplace_back(&p.sigma_y_raw, 1);
    return spans;
}

inline std::vector<std::span<const double>> grad_spans(const LcvaGrads& g) {
    std::vector<std::span<const double>> spans;
    detail::visit_param_arrays(g, [&](const Vec& v) { spans.emplace_back(v); });
    spans.emplace_back(&g.sigma_y_raw, 1);
    return spans;
}

inline std::size_t param_count(const LcvaParams& p) {
    std::size_t n = 1;  // sigma_y_raw
    detail::visit_param_arrays(p, [&](const Vec& v) { n += v.size(); });
    return n;
}

inline bool params_finite(const LcvaParams& p) {
    bool ok = std::isfinite(p.sigma_y_raw);
    detail::visit_param_arrays(p, [&](const Vec& v) { ok = ok && all_finite(v); });
    return ok;
}

// One observed directed pair: ego covariates/treatment/outcome plus the
// peer's covariates and treatment.
struct PairObs {
    Vec x_u;
    Vec x_v;
    double t_u = 0.0;
    double t_v = 0.0;
    double y_u = 0.0;
};

inline PairObs make_pair_obs(const PairedDataset& dataset, const PairSample& pair) {
    const UnitRecord& ego = dataset.units[pair.ego];
    const UnitRecord& peer = dataset.units[pair.peer];
    return PairObs{ego.covariates, peer.covariates, static_cast<double>(ego.treatment),
                   static_cast<double>(peer.treatment), ego.outcome};
}

namespace detail {

// Peer inputs after the spillover switch.
struct PeerView {
    Vec x_v;      // zeroed when spillover is disabled
    double t_v;   // likewise
};

inline PeerView peer_view(const LcvaConfig& config, const PairObs& obs) {
    if (config.spillover_enabled) return PeerView{obs.x_v, obs.t_v};
    return PeerView{Vec(obs.x_v.size(), 0.0), 0.0};
}

inline Vec encoder_input(const PairObs& obs, const PeerView& peer, double y_u) {
    Vec in;
    in.reserve(obs.x_u.size() + peer.x_v.size() + 3);
    in.insert(in.end(), obs.x_u.begin(), obs.x_u.end());
    in.insert(in.end(), peer.x_v.begin(), peer.x_v.end());
    in.push_back(obs.t_u);
    in.push_back(peer.t_v);
    in.push_back(y_u);
    return in;
}

inline Vec aux_y_input(const PairObs& obs, const PeerView& peer) {
    Vec in;
    in.reserve(obs.x_u.size() + peer.x_v.size() + 2);
    in.insert(in.end(), obs.x_u.begin(), obs.x_u.end());
    in.insert(in.end(), peer.x_v.begin(), peer.x_v.end());
    in.push_back(obs.t_u);
    in.push_back(peer.t_v);
    return in;
}

// Forward state of the encoder kept for the backward pass.
struct EncodeWork {
    Vec enc_in;
    MlpTrace trunk_trace;
    MlpTrace head_trace;
    Vec head_out;          // [mu (K), raw sigma (K)]
    bool used_t1_head = false;
};

inline PosteriorMoments encode_forward(const LcvaParams& params, const LcvaConfig& config,
                                       const PairObs& obs, const PeerView& peer, double y_enc,
                                       EncodeWork& work) {
    const std::size_t k = config.latent_dim;
    work.enc_in = encoder_input(obs, peer, y_enc);
    const Vec trunk_out = mlp_forward_trace(params.encoder_shared, work.enc_in, work.trunk_trace);
    work.used_t1_head = obs.t_u != 0.0;
    const MlpNet& head = work.used_t1_head ? params.encoder_head_t1 : params.encoder_head_t0;
    work.head_out = mlp_forward_trace(head, trunk_out, work.head_trace);

    PosteriorMoments moments;
    moments.mu.assign(work.head_out.begin(), work.head_out.begin() + static_cast<long>(k));
    moments.sigma.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        moments.sigma[j] = softplus(work.head_out[k + j]) + kSigmaFloor;
    }
    return moments;
}

inline double sigma_y(const LcvaParams& params) {
    return softplus(params.sigma_y_raw) + kSigmaFloor;
}

}  // namespace detail

// q(z | x_u, x_v, t_u, t_v, y_u): shared trunk, then the arm head selected by
// the ego treatment; sigma = softplus(raw head output) + floor.
inline PosteriorMoments encode_posterior(const LcvaParams& params, const LcvaConfig& config,
                                         const Vec& x_u, const Vec& x_v, int t_u, int t_v,
                                         double y_u) {
    PairObs obs{x_u, x_v, static_cast<double>(t_u), static_cast<double>(t_v), y_u};
    detail::EncodeWork work;
    return detail::encode_forward(params, config, obs, detail::peer_view(config, obs), y_u, work);
}

// log p(x_u | z) = sum_j log N(x_uj; mu_xj(z), sigma_xj(z))
inline double decode_x_log_prob(const LcvaParams& params, const Vec& z, const Vec& x_u) {
    const Vec out = mlp_forward(params.dec_x_net, z);
    if (out.size() != 2 * x_u.size()) {
        throw ShapeError("decode_x_log_prob: decoder emits " + std::to_string(out.size()) +
                         " values for " + std::to_string(x_u.size()) + " covariates");
    }
    const std::size_t d = x_u.size();
    double lp = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        lp += gaussian_log_prob(x_u[j], out[j], softplus(out[d + j]) + kSigmaFloor);
    }
    return lp;
}

// log p(t_u | z) with p = clamped logistic(g1(z))
inline double decode_t_log_prob(const LcvaParams& params, const Vec& z, int t_u) {
    const double logit = mlp_forward(params.dec_t_net, z)[0];
    return bernoulli_log_prob(t_u, clamp_probability(logistic(logit)));
}

// Treatment-switched outcome head: mu_y = t_u*g2([z, t_v]) + (1-t_u)*g3([z, t_v]).
// sigma_y is one learned positive scalar shared across units.
inline std::pair<double, double> decode_y(const LcvaParams& params, const LcvaConfig& config,
                                          const Vec& z, int t_u, int t_v) {
    Vec in = z;
    in.push_back(config.spillover_enabled ? static_cast<double>(t_v) : 0.0);
    const MlpNet& head = t_u != 0 ? params.dec_y_head_t1 : params.dec_y_head_t0;
    return {mlp_forward(head, in)[0], detail::sigma_y(params)};
}

// Per-term breakdown of one pair's objective (all already scaled by 1/L
// where Monte Carlo applies).
struct ElboTerms {
    double recon_x = 0.0;
    double recon_t = 0.0;
    double recon_y = 0.0;
    double kl = 0.0;
    double aux_t_ego = 0.0;
    double aux_t_peer = 0.0;
    double aux_y = 0.0;

    double objective() const {
        return recon_x + recon_t + recon_y - kl + aux_t_ego + aux_t_peer + aux_y;
    }
};

namespace detail {

inline void check_term(double value, const char* name) {
    if (!std::isfinite(value)) {
        throw NumericError(std::string("elbo: term '") + name + "' is non-finite");
    }
}

// d log Bernoulli(t; clamp(logistic(logit))) / d logit. Zero while clamped,
// matching the gradient of the clamped objective.
inline double bernoulli_logit_grad(double t, double logit) {
    const double p = logistic(logit);
    if (p <= kProbClampLo || p >= kProbClampHi) return 0.0;
    return t - p;
}

}  // namespace detail

// Monte-Carlo ELBO of one pair plus auxiliary posterior terms; accumulates
// scale * d(objective)/d(params) into grads and returns the per-term values.
//
//   objective = E_z[log p(x_u|z) + log p(t_u|z) + log p(y_u|t_u, t_v, z)]
//             - KL(q(z|pair) || N(0,I))
//             + log q(t_u|x_u) + log q(t_v|x_v) + log q(y_u|x_u, x_v, t_u, t_v)
inline ElboTerms elbo_pair_accumulate(const LcvaParams& params, const LcvaConfig& config,
                                      const PairObs& obs, SeededRng& rng, LcvaGrads& grads,
                                      double scale) {
    config.validate();
    const std::size_t k = config.latent_dim;
    const std::size_t d = obs.x_u.size();
    if (d != config.feature_dim || obs.x_v.size() != d) {
        throw ShapeError("elbo: covariate length mismatch");
    }
    const auto peer = detail::peer_view(config, obs);
    const double inv_l = 1.0 / static_cast<double>(config.mc_samples);

    detail::EncodeWork enc;
    const PosteriorMoments moments =
        detail::encode_forward(params, config, obs, peer, obs.y_u, enc);

    ElboTerms terms;
    Vec mu_grad(k, 0.0);     // d objective / d mu (z route)
    Vec sigma_grad(k, 0.0);  // d objective / d sigma (z route)
    const double sy = detail::sigma_y(params);
    double sigma_y_grad = 0.0;

    MlpTrace dec_x_trace, dec_t_trace, dec_y_trace;
    for (std::size_t l = 0; l < config.mc_samples; ++l) {
        Vec eps(k);
        Vec z(k);
        for (std::size_t j = 0; j < k; ++j) {
            eps[j] = rng.normal();
            z[j] = moments.mu[j] + moments.sigma[j] * eps[j];
        }

        // p(x|z)
        const Vec dec_x_out = mlp_forward_trace(params.dec_x_net, z, dec_x_trace);
        Vec dec_x_up(2 * d);
        for (std::size_t j = 0; j < d; ++j) {
            const double raw = dec_x_out[d + j];
            const double sx = softplus(raw) + kSigmaFloor;
            const double diff = obs.x_u[j] - dec_x_out[j];
            terms.recon_x += inv_l * gaussian_log_prob(obs.x_u[j], dec_x_out[j], sx);
            dec_x_up[j] = diff / (sx * sx);
            dec_x_up[d + j] = (-1.0 / sx + diff * diff / (sx * sx * sx)) * logistic(raw);
        }
        Vec z_grad = mlp_backward_accumulate(params.dec_x_net, dec_x_trace, dec_x_up,
                                             grads.dec_x_net, scale * inv_l);

        // p(t|z)
        const double t_logit = mlp_forward_trace(params.dec_t_net, z, dec_t_trace)[0];
        terms.recon_t +=
            inv_l * bernoulli_log_prob(static_cast<int>(obs.t_u),
                                       clamp_probability(logistic(t_logit)));
        const Vec dec_t_up{detail::bernoulli_logit_grad(obs.t_u, t_logit)};
        axpy(z_grad, 1.0,
             mlp_backward_accumulate(params.dec_t_net, dec_t_trace, dec_t_up, grads.dec_t_net,
                                     scale * inv_l));

        // p(y|t_u, t_v, z) through the switched head
        Vec dec_y_in = z;
        dec_y_in.push_back(peer.t_v);
        const bool y_head_t1 = obs.t_u != 0.0;
        const MlpNet& y_head = y_head_t1 ? params.dec_y_head_t1 : params.dec_y_head_t0;
        MlpGrads& y_head_grads = y_head_t1 ? grads.dec_y_head_t1 : grads.dec_y_head_t0;
        const double mu_y = mlp_forward_trace(y_head, dec_y_in, dec_y_trace)[0];
        const double y_diff = obs.y_u - mu_y;
        terms.recon_y += inv_l * gaussian_log_prob(obs.y_u, mu_y, sy);
        const Vec dec_y_up{y_diff / (sy * sy)};
        const Vec dec_y_in_grad =
            mlp_backward_accumulate(y_head, dec_y_trace, dec_y_up, y_head_grads, scale * inv_l);
        for (std::size_t j = 0; j < k; ++j) z_grad[j] += dec_y_in_grad[j];
        sigma_y_grad += inv_l * (-1.0 / sy + y_diff * y_diff / (sy * sy * sy));

        // Reparameterization: z = mu + sigma .* eps. z_grad carries scale*inv_l;
        // strip the leading scale so mu/sigma grads stay in objective units.
        for (std::size_t j = 0; j < k; ++j) {
            const double g = z_grad[j] / scale;
            mu_grad[j] += g;
            sigma_grad[j] += g * eps[j];
        }
    }
    detail::check_term(terms.recon_x, "recon_x");
    detail::check_term(terms.recon_t, "recon_t");
    detail::check_term(terms.recon_y, "recon_y");

    grads.sigma_y_raw += scale * sigma_y_grad * logistic(params.sigma_y_raw);

    // Analytic KL against the standard-normal prior.
    terms.kl = gaussian_kl_to_standard(moments.mu, moments.sigma);
    detail::check_term(terms.kl, "kl");
    for (std::size_t j = 0; j < k; ++j) {
        mu_grad[j] -= moments.mu[j];
        sigma_grad[j] -= moments.sigma[j] - 1.0 / moments.sigma[j];
    }

    // Back through the selected arm head and the shared trunk.
    Vec head_up(2 * k);
    for (std::size_t j = 0; j < k; ++j) {
        head_up[j] = mu_grad[j];
        head_up[k + j] = sigma_grad[j] * logistic(enc.head_out[k + j]);
    }
    const MlpNet& head = enc.used_t1_head ? params.encoder_head_t1 : params.encoder_head_t0;
    MlpGrads& head_grads = enc.used_t1_head ? grads.encoder_head_t1 : grads.encoder_head_t0;
    const Vec trunk_up = mlp_backward_accumulate(head, enc.head_trace, head_up, head_grads, scale);
    Vec trunk_up_unscaled = trunk_up;
    if (scale != 1.0) {
        for (double& v : trunk_up_unscaled) v /= scale;
    }
    mlp_backward_accumulate(params.encoder_shared, enc.trunk_trace, trunk_up_unscaled,
                            grads.encoder_shared, scale);

    // Auxiliary q(t_u|x_u), q(t_v|x_v) with a shared network.
    MlpTrace aux_trace;
    {
        const double logit = mlp_forward_trace(params.aux_t_net, obs.x_u, aux_trace)[0];
        terms.aux_t_ego = bernoulli_log_prob(static_cast<int>(obs.t_u),
                                             clamp_probability(logistic(logit)));
        const Vec up{detail::bernoulli_logit_grad(obs.t_u, logit)};
        mlp_backward_accumulate(params.aux_t_net, aux_trace, up, grads.aux_t_net, scale);
    }
    {
        const double logit = mlp_forward_trace(params.aux_t_net, peer.x_v, aux_trace)[0];
        terms.aux_t_peer = bernoulli_log_prob(static_cast<int>(peer.t_v),
                                              clamp_probability(logistic(logit)));
        const Vec up{detail::bernoulli_logit_grad(peer.t_v, logit)};
        mlp_backward_accumulate(params.aux_t_net, aux_trace, up, grads.aux_t_net, scale);
    }
    // Auxiliary q(y | x_u, x_v, t_u, t_v), unit-variance Gaussian.
    {
        const Vec in = detail::aux_y_input(obs, peer);
        const double mu_aux = mlp_forward_trace(params.aux_y_net, in, aux_trace)[0];
        terms.aux_y = gaussian_log_prob(obs.y_u, mu_aux, 1.0);
        const Vec up{obs.y_u - mu_aux};
        mlp_backward_accumulate(params.aux_y_net, aux_trace, up, grads.aux_y_net, scale);
    }
    detail::check_term(terms.aux_t_ego, "aux_t_ego");
    detail::check_term(terms.aux_t_peer, "aux_t_peer");
    detail::check_term(terms.aux_y, "aux_y");
    return terms;
}

struct ElboResult {
    ElboTerms terms;
    LcvaGrads grads;

    double objective() const { return terms.objective(); }
};

inline ElboResult elbo_pair(const LcvaParams& params, const LcvaConfig& config, const PairObs& obs,
                            SeededRng& rng) {
    ElboResult result{ElboTerms{}, zeros_like(params)};
    result.terms = elbo_pair_accumulate(params, config, obs, rng, result.grads, 1.0);
    return result;
}

struct FitResult {
    LcvaParams params;
    std::vector<double> epoch_objectives;  // mean per-pair objective per epoch
};

// Mini-batch Adam ascent on the summed pair objective. Deterministic given
// config.seed; single-threaded by contract.
inline FitResult fit(const PairedDataset& dataset, const LcvaConfig& config) {
    config.validate();
    if (dataset.pairs.empty()) throw UsageError("fit: dataset has no pairs");
    if (dataset.feature_dim != config.feature_dim) {
        throw ShapeError("fit: dataset feature_dim " + std::to_string(dataset.feature_dim) +
                         " != config feature_dim " + std::to_string(config.feature_dim));
    }

    SeededRng rng(config.seed);
    FitResult result{init_lcva_params(config, rng), {}};

    std::vector<PairObs> obs;
    obs.reserve(dataset.pairs.size());
    for (const auto& p : dataset.pairs) obs.push_back(make_pair_obs(dataset, p));

    AdamState adam(param_count(result.params), AdamConfig{config.learning_rate});
    LcvaGrads grads = zeros_like(result.params);
    const auto p_spans = param_spans(result.params);

    std::vector<std::size_t> order(obs.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(start + config.batch_size, order.size());
            const double batch_n = static_cast<double>(stop - start);
            zero_grads(grads);
            double batch_sum = 0.0;
            try {
                for (std::size_t i = start; i < stop; ++i) {
                    // Accumulate -grad/batch_n: Adam minimizes, we ascend.
                    batch_sum +=
                        elbo_pair_accumulate(result.params, config, obs[order[i]], rng, grads,
                                             -1.0 / batch_n)
                            .objective();
                }
            } catch (const NumericError& e) {
                throw NumericError("fit: diverged at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(start / config.batch_size) + ": " + e.what());
            }
            if (!std::isfinite(batch_sum)) {
                throw NumericError("fit: non-finite objective at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(start / config.batch_size));
            }
            adam_step(adam, p_spans, grad_spans(grads));
            epoch_sum += batch_sum;
        }
        result.epoch_objectives.push_back(epoch_sum / static_cast<double>(obs.size()));
    }
    return result;
}

}  // namespace lcva
