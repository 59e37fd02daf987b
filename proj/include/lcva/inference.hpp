#pragma once

#include <cmath>
#include <vector>

#include "lcva/errors.hpp"
#include "lcva/model.hpp"
#include "lcva/prob.hpp"
#include "lcva/rng.hpp"

namespace lcva {

// Monte-Carlo potential-outcome estimates for one pair. Raw model outputs:
// the factual-arm override (replace the factual arm's estimate with the
// observed outcome) is a metrics-layer convention, not applied here.
struct PotentialOutcomes {
    double y_hat_t0 = 0.0;
    double y_hat_t1 = 0.0;
    double mc_std_t0 = 0.0;
    double mc_std_t1 = 0.0;
};

// Default Monte-Carlo sample count at inference time.
inline constexpr std::size_t kDefaultInferenceSamples = 100;

// Draws z from the treatment-switched posterior of the observed pair, then
// decodes the outcome under both ego arms with the pair's observed peer
// treatment. With use_factual_y=false the conditioning outcome is imputed by
// the auxiliary q(y|x_u, x_v, t_u, t_v) network.
inline PotentialOutcomes predict_potential_outcomes(const LcvaParams& params,
                                                    const LcvaConfig& config, const PairObs& obs,
                                                    bool use_factual_y, SeededRng& rng,
                                                    std::size_t mc_samples = kDefaultInferenceSamples) {
    if (mc_samples == 0) throw UsageError("predict: mc_samples must be at least 1");
    const auto peer = detail::peer_view(config, obs);

    double y_enc = obs.y_u;
    if (!use_factual_y) {
        y_enc = mlp_forward(params.aux_y_net, detail::aux_y_input(obs, peer))[0];
    }
    detail::EncodeWork work;
    const PosteriorMoments moments =
        detail::encode_forward(params, config, obs, peer, y_enc, work);

    const int t_v = static_cast<int>(obs.t_v);
    double sum0 = 0.0, sum1 = 0.0, sq0 = 0.0, sq1 = 0.0;
    for (std::size_t l = 0; l < mc_samples; ++l) {
        const Vec z = reparameterize(moments.mu, moments.sigma, rng);
        const double mu0 = decode_y(params, config, z, 0, t_v).first;
        const double mu1 = decode_y(params, config, z, 1, t_v).first;
        if (!std::isfinite(mu0) || !std::isfinite(mu1)) {
            throw ModelError("predict: decoded outcome is non-finite (untrained or diverged model)");
        }
        sum0 += mu0;
        sum1 += mu1;
        sq0 += mu0 * mu0;
        sq1 += mu1 * mu1;
    }
    const double n = static_cast<double>(mc_samples);
    PotentialOutcomes out;
    out.y_hat_t0 = sum0 / n;
    out.y_hat_t1 = sum1 / n;
    out.mc_std_t0 = std::sqrt(std::max(0.0, sq0 / n - out.y_hat_t0 * out.y_hat_t0));
    out.mc_std_t1 = std::sqrt(std::max(0.0, sq1 / n - out.y_hat_t1 * out.y_hat_t1));
    return out;
}

inline double estimate_ite(const PotentialOutcomes& outcome) {
    return outcome.y_hat_t1 - outcome.y_hat_t0;
}

inline double estimate_ate(const std::vector<PotentialOutcomes>& outcomes) {
    if (outcomes.empty()) throw UsageError("estimate_ate: empty outcome list");
    double s = 0.0;
    for (const auto& o : outcomes) s += estimate_ite(o);
    return s / static_cast<double>(outcomes.size());
}

}  // namespace lcva
