#pragma once

#include <string>
#include <vector>

#include "lcva/dataset.hpp"
#include "lcva/errors.hpp"
#include "lcva/inference.hpp"
#include "lcva/matrix.hpp"
#include "lcva/model.hpp"

namespace lcva {

// Ridge strength used only when the normal equations are rank deficient.
inline constexpr double kRidgeFallbackLambda = 1e-8;

// Least-squares linear model over a named input layout.
// Layouts used by the baselines:
//   "x,t_u,t_v"  pooled regression  y ~ [x_u, t_u, t_v]
//   "x,t_v"      per-arm regression y ~ [x_u, t_v]
struct LinearModel {
    Vec coefficients;
    double intercept = 0.0;
    std::string layout;
    bool ridge_used = false;

    double predict(const Vec& features) const {
        if (features.size() != coefficients.size()) {
            throw ShapeError("LinearModel: feature length " + std::to_string(features.size()) +
                             " != coefficient length " + std::to_string(coefficients.size()));
        }
        return intercept + dot(coefficients, features);
    }
};

namespace detail {

// Normal-equations solve with an automatic tiny-ridge retry on rank
// deficiency (flagged on the returned model).
inline LinearModel fit_least_squares(const std::vector<Vec>& rows, const Vec& targets,
                                     std::string layout) {
    const std::size_t n = rows.size();
    const std::size_t m = rows.front().size() + 1;  // +1 intercept

    Matrix xtx(m, m);
    Vec xty(m, 0.0);
    Vec aug(m);
    for (std::size_t i = 0; i < n; ++i) {
        aug[0] = 1.0;
        for (std::size_t j = 0; j < rows[i].size(); ++j) aug[j + 1] = rows[i][j];
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = a; b < m; ++b) xtx(a, b) += aug[a] * aug[b];
            xty[a] += aug[a] * targets[i];
        }
    }
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < a; ++b) xtx(a, b) = xtx(b, a);
    }

    LinearModel model;
    model.layout = std::move(layout);
    Vec beta;
    if (!cholesky_solve(xtx, xty, beta)) {
        for (std::size_t a = 0; a < m; ++a) xtx(a, a) += kRidgeFallbackLambda;
        if (!cholesky_solve(xtx, xty, beta)) {
            throw NumericError("linear fit: normal equations unsolvable even with ridge");
        }
        model.ridge_used = true;
    }
    model.intercept = beta[0];
    model.coefficients.assign(beta.begin() + 1, beta.end());
    return model;
}

inline Vec ols1_features(const Vec& x_u, double t_u, double t_v) {
    Vec f = x_u;
    f.push_back(t_u);
    f.push_back(t_v);
    return f;
}

inline Vec ols2_features(const Vec& x_u, double t_v) {
    Vec f = x_u;
    f.push_back(t_v);
    return f;
}

}  // namespace detail

// Pooled regression y_u ~ [x_u, t_u, t_v] over all directed pairs.
inline LinearModel fit_ols1(const PairedDataset& dataset) {
    const std::size_t d = dataset.feature_dim;
    if (dataset.pairs.size() < d + 3) {
        throw UsageError("ols1: need at least " + std::to_string(d + 3) + " pair samples, have " +
                         std::to_string(dataset.pairs.size()));
    }
    std::vector<Vec> rows;
    Vec targets;
    rows.reserve(dataset.pairs.size());
    targets.reserve(dataset.pairs.size());
    for (const auto& p : dataset.pairs) {
        const auto& ego = dataset.units[p.ego];
        rows.push_back(detail::ols1_features(ego.covariates,
                                             static_cast<double>(ego.treatment),
                                             static_cast<double>(dataset.units[p.peer].treatment)));
        targets.push_back(ego.outcome);
    }
    return detail::fit_least_squares(rows, targets, "x,t_u,t_v");
}

inline PotentialOutcomes ols1_potential_outcomes(const LinearModel& model,
                                                 const PairedDataset& dataset,
                                                 const PairSample& pair) {
    const auto& ego = dataset.units[pair.ego];
    const double t_v = static_cast<double>(dataset.units[pair.peer].treatment);
    PotentialOutcomes out;
    out.y_hat_t0 = model.predict(detail::ols1_features(ego.covariates, 0.0, t_v));
    out.y_hat_t1 = model.predict(detail::ols1_features(ego.covariates, 1.0, t_v));
    return out;
}

// Two per-arm regressions y_u ~ [x_u, t_v]: f1 on treated egos, f0 on controls.
struct Ols2Model {
    LinearModel f1;
    LinearModel f0;
};

inline Ols2Model fit_ols2(const PairedDataset& dataset) {
    const std::size_t d = dataset.feature_dim;
    std::vector<Vec> rows1, rows0;
    Vec y1, y0;
    for (const auto& p : dataset.pairs) {
        const auto& ego = dataset.units[p.ego];
        const double t_v = static_cast<double>(dataset.units[p.peer].treatment);
        if (ego.treatment == 1) {
            rows1.push_back(detail::ols2_features(ego.covariates, t_v));
            y1.push_back(ego.outcome);
        } else {
            rows0.push_back(detail::ols2_features(ego.covariates, t_v));
            y0.push_back(ego.outcome);
        }
    }
    const std::size_t min_arm = d + 2;
    if (rows1.size() < min_arm) {
        throw UsageError("ols2: treated arm has " + std::to_string(rows1.size()) +
                         " samples, need at least " + std::to_string(min_arm));
    }
    if (rows0.size() < min_arm) {
        throw UsageError("ols2: control arm has " + std::to_string(rows0.size()) +
                         " samples, need at least " + std::to_string(min_arm));
    }
    return Ols2Model{detail::fit_least_squares(rows1, y1, "x,t_v"),
                     detail::fit_least_squares(rows0, y0, "x,t_v")};
}

inline PotentialOutcomes ols2_potential_outcomes(const Ols2Model& model,
                                                 const PairedDataset& dataset,
                                                 const PairSample& pair) {
    const auto& ego = dataset.units[pair.ego];
    const double t_v = static_cast<double>(dataset.units[pair.peer].treatment);
    const Vec f = detail::ols2_features(ego.covariates, t_v);
    return PotentialOutcomes{model.f0.predict(f), model.f1.predict(f), 0.0, 0.0};
}

}  // namespace lcva
