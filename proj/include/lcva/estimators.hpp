#pragma once

#include <string>
#include <variant>
#include <vector>

#include "lcva/dataset.hpp"
#include "lcva/errors.hpp"
#include "lcva/forest.hpp"
#include "lcva/inference.hpp"
#include "lcva/linear.hpp"
#include "lcva/model.hpp"

namespace lcva {

enum class EstimatorKind { Lcva, Cevae, Ols1, Ols2, Forest };

inline const std::vector<EstimatorKind>& all_estimators() {
    static const std::vector<EstimatorKind> kinds{EstimatorKind::Ols1, EstimatorKind::Ols2,
                                                  EstimatorKind::Forest, EstimatorKind::Cevae,
                                                  EstimatorKind::Lcva};
    return kinds;
}

inline std::string estimator_id(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::Lcva: return "lcva";
        case EstimatorKind::Cevae: return "cevae";
        case EstimatorKind::Ols1: return "ols1";
        case EstimatorKind::Ols2: return "ols2";
        case EstimatorKind::Forest: return "forest";
    }
    throw UsageError("unknown estimator kind");
}

// Row labels used in rendered result tables.
inline std::string estimator_display(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::Lcva: return "LCVA";
        case EstimatorKind::Cevae: return "CEVAE";
        case EstimatorKind::Ols1: return "OLS1";
        case EstimatorKind::Ols2: return "OLS2";
        case EstimatorKind::Forest: return "RF";
    }
    throw UsageError("unknown estimator kind");
}

inline EstimatorKind parse_estimator(const std::string& name) {
    for (EstimatorKind kind : all_estimators()) {
        if (estimator_id(kind) == name) return kind;
    }
    throw UsageError("unknown estimator '" + name +
                     "' (expected one of lcva, cevae, ols1, ols2, forest)");
}

// The CEVAE ablation: the same model with every peer input zeroed.
inline FitResult fit_cevae(const PairedDataset& dataset, LcvaConfig config) {
    config.spillover_enabled = false;
    return fit(dataset, config);
}

struct VaeModel {
    LcvaConfig config;
    LcvaParams params;
    std::vector<double> trace;
};

// Any fitted estimator behind the common fit/predict interface used by the
// evaluation harness.
struct TrainedEstimator {
    EstimatorKind kind = EstimatorKind::Lcva;
    std::variant<VaeModel, LinearModel, Ols2Model, RegressionForest> model;
};

inline TrainedEstimator train_estimator(EstimatorKind kind, const PairedDataset& dataset,
                                        LcvaConfig lcva_config, ForestConfig forest_config) {
    TrainedEstimator est;
    est.kind = kind;
    switch (kind) {
        case EstimatorKind::Lcva: {
            lcva_config.spillover_enabled = true;
            FitResult fitres = fit(dataset, lcva_config);
            est.model = VaeModel{lcva_config, std::move(fitres.params),
                                 std::move(fitres.epoch_objectives)};
            break;
        }
        case EstimatorKind::Cevae: {
            lcva_config.spillover_enabled = false;
            FitResult fitres = fit(dataset, lcva_config);
            est.model = VaeModel{lcva_config, std::move(fitres.params),
                                 std::move(fitres.epoch_objectives)};
            break;
        }
        case EstimatorKind::Ols1:
            est.model = fit_ols1(dataset);
            break;
        case EstimatorKind::Ols2:
            est.model = fit_ols2(dataset);
            break;
        case EstimatorKind::Forest:
            est.model = fit_forest(dataset, forest_config);
            break;
    }
    return est;
}

// Potential outcomes for one test pair. VAE estimators consume the rng
// (callers derive a per-pair stream); baselines are deterministic.
inline PotentialOutcomes predict_estimator(const TrainedEstimator& est,
                                           const PairedDataset& dataset, const PairSample& pair,
                                           SeededRng& rng,
                                           std::size_t mc_samples = kDefaultInferenceSamples,
                                           bool use_factual_y = true) {
    if (const auto* vae = std::get_if<VaeModel>(&est.model)) {
        const PairObs obs = make_pair_obs(dataset, pair);
        return predict_potential_outcomes(vae->params, vae->config, obs, use_factual_y, rng,
                                          mc_samples);
    }
    if (const auto* lm = std::get_if<LinearModel>(&est.model)) {
        return ols1_potential_outcomes(*lm, dataset, pair);
    }
    if (const auto* two = std::get_if<Ols2Model>(&est.model)) {
        return ols2_potential_outcomes(*two, dataset, pair);
    }
    return forest_potential_outcomes(std::get<RegressionForest>(est.model), dataset, pair);
}

}  // namespace lcva
