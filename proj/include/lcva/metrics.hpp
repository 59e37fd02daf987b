#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcva/dataset.hpp"
#include "lcva/errors.hpp"

namespace lcva {

// One evaluated ego: observed data plus both-arm predictions. The factual-arm
// override (replace the factual arm's prediction with the observed outcome)
// happens here in the metrics layer.
struct PredictionRow {
    int treatment = 0;
    bool randomized_subset = false;
    double y = 0.0;                    // factual outcome, raw scale
    std::optional<double> y_cf;        // counterfactual outcome when available
    double y_scaled = 0.0;             // factual outcome scaled to [0,1]
    double y_hat_t0 = 0.0;
    double y_hat_t1 = 0.0;
};

// Ground-truth ATE from a randomized-trial subset: difference of factual
// group means over flagged units.
inline double ground_truth_ate_randomized(const std::vector<UnitRecord>& units) {
    double sum_t = 0.0, sum_c = 0.0;
    std::size_t n_t = 0, n_c = 0;
    for (const auto& u : units) {
        if (!u.randomized_subset) continue;
        if (u.treatment == 1) {
            sum_t += u.outcome;
            ++n_t;
        } else {
            sum_c += u.outcome;
            ++n_c;
        }
    }
    if (n_t == 0 || n_c == 0) {
        throw UsageError("ground_truth_ate_randomized: a randomized group is empty (treated " +
                         std::to_string(n_t) + ", control " + std::to_string(n_c) + ")");
    }
    return sum_t / static_cast<double>(n_t) - sum_c / static_cast<double>(n_c);
}

// Ground-truth ATE when counterfactual outcomes exist (synthetic or matched).
inline double ground_truth_ate_counterfactual(const std::vector<PredictionRow>& rows) {
    if (rows.empty()) throw UsageError("ground_truth_ate: no rows");
    double s = 0.0;
    for (const auto& r : rows) {
        if (!r.y_cf) throw UsageError("ground_truth_ate: missing counterfactual outcome");
        s += r.treatment == 1 ? r.y - *r.y_cf : *r.y_cf - r.y;
    }
    return s / static_cast<double>(rows.size());
}

inline double ate_error(double estimated_ate, double ground_truth_ate) {
    return std::abs(estimated_ate - ground_truth_ate);
}

// Estimated ATE with the factual-arm override: for a treated ego the treated
// arm is the observed outcome and only y_hat_t0 is model output (mirrored for
// controls).
inline double estimated_ate_with_override(const std::vector<PredictionRow>& rows) {
    if (rows.empty()) throw UsageError("estimated_ate: no rows");
    double s = 0.0;
    for (const auto& r : rows) {
        s += r.treatment == 1 ? r.y - r.y_hat_t0 : r.y_hat_t1 - r.y;
    }
    return s / static_cast<double>(rows.size());
}

struct PolicyRiskResult {
    double value = 0.0;
    // An empty conditional cell contributes 0 to the expectation and is flagged.
    bool empty_treated_cell = false;
    bool empty_control_cell = false;
};

// pr = 1 - (E[y~1 | t=1, pi=1] p(pi=1) + E[y~0 | t=0, pi=0] p(pi=0)) over the
// randomized subset, with pi = 1(y_hat_t1 - y_hat_t0 > 0); ties mean "do not
// treat". Uses the [0,1]-scaled factual outcomes.
inline PolicyRiskResult policy_risk(const std::vector<PredictionRow>& rows) {
    std::size_t n = 0, n_pi1 = 0;
    double sum_t1_pi1 = 0.0, sum_t0_pi0 = 0.0;
    std::size_t n_t1_pi1 = 0, n_t0_pi0 = 0;
    for (const auto& r : rows) {
        if (!r.randomized_subset) continue;
        ++n;
        const bool pi = r.y_hat_t1 - r.y_hat_t0 > 0.0;
        if (pi) ++n_pi1;
        if (r.treatment == 1 && pi) {
            sum_t1_pi1 += r.y_scaled;
            ++n_t1_pi1;
        } else if (r.treatment == 0 && !pi) {
            sum_t0_pi0 += r.y_scaled;
            ++n_t0_pi0;
        }
    }
    if (n == 0) throw UsageError("policy_risk: no randomized-subset rows");

    const double p1 = static_cast<double>(n_pi1) / static_cast<double>(n);
    const double p0 = 1.0 - p1;
    PolicyRiskResult result;
    result.empty_treated_cell = n_t1_pi1 == 0;
    result.empty_control_cell = n_t0_pi0 == 0;
    const double e1 = n_t1_pi1 > 0 ? sum_t1_pi1 / static_cast<double>(n_t1_pi1) : 0.0;
    const double e0 = n_t0_pi0 > 0 ? sum_t0_pi0 / static_cast<double>(n_t0_pi0) : 0.0;
    result.value = 1.0 - (e1 * p1 + e0 * p0);
    return result;
}

// PEHE = mean squared error of estimated vs. true individual treatment
// effects, with the factual-arm override applied to both sides.
inline double pehe(const std::vector<PredictionRow>& rows) {
    if (rows.empty()) throw UsageError("pehe: no rows");
    double s = 0.0;
    for (const auto& r : rows) {
        if (!r.y_cf) throw UsageError("pehe: missing counterfactual outcome");
        const double true_ite = r.treatment == 1 ? r.y - *r.y_cf : *r.y_cf - r.y;
        const double est_ite = r.treatment == 1 ? r.y - r.y_hat_t0 : r.y_hat_t1 - r.y;
        const double diff = true_ite - est_ite;
        s += diff * diff;
    }
    return s / static_cast<double>(rows.size());
}

struct MetricsReport {
    std::string model_name;
    double eps_ate = 0.0;
    std::optional<double> policy_risk;
    std::optional<double> pehe;
    double estimated_ate = 0.0;
    double ground_truth_ate = 0.0;
    std::size_t n_evaluated = 0;
    std::optional<OutcomeScaling> scaling;
    std::uint64_t seed = 0;
    double wall_time_seconds = 0.0;
    std::vector<std::string> notes;
};

inline nlohmann::ordered_json metrics_report_to_json(const MetricsReport& r) {
    nlohmann::ordered_json j{
        {"format_version", 1},
        {"model", r.model_name},
        {"eps_ate", r.eps_ate},
        {"policy_risk", nullptr},
        {"pehe", nullptr},
        {"estimated_ate", r.estimated_ate},
        {"ground_truth_ate", r.ground_truth_ate},
        {"n_evaluated", r.n_evaluated},
        {"scaling", nullptr},
        {"seed", r.seed},
        {"wall_time_seconds", r.wall_time_seconds},
        {"notes", r.notes},
    };
    if (r.policy_risk) j["policy_risk"] = *r.policy_risk;
    if (r.pehe) j["pehe"] = *r.pehe;
    if (r.scaling) j["scaling"] = {{"min", r.scaling->min}, {"max", r.scaling->max}};
    return j;
}

// Plain-text table mirroring the benchmark layout:
// Models | eps_ATE | Policy Risk | PEHE (optional columns appear when any
// row carries them).
inline std::string render_metrics_table(const std::vector<MetricsReport>& reports) {
    const bool any_pr = std::any_of(reports.begin(), reports.end(),
                                    [](const auto& r) { return r.policy_risk.has_value(); });
    const bool any_pehe = std::any_of(reports.begin(), reports.end(),
                                      [](const auto& r) { return r.pehe.has_value(); });
    auto fmt = [](double v) {
        std::ostringstream os;
        os << std::setprecision(6) << v;
        return os.str();
    };

    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"Models", "eps_ATE"};
    if (any_pr) header.push_back("Policy Risk");
    if (any_pehe) header.push_back("PEHE");
    grid.push_back(header);
    for (const auto& r : reports) {
        std::vector<std::string> row{r.model_name, fmt(r.eps_ate)};
        if (any_pr) row.push_back(r.policy_risk ? fmt(*r.policy_risk) : "-");
        if (any_pehe) row.push_back(r.pehe ? fmt(*r.pehe) : "-");
        grid.push_back(std::move(row));
    }

    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream os;
    for (std::size_t rix = 0; rix < grid.size(); ++rix) {
        for (std::size_t c = 0; c < grid[rix].size(); ++c) {
            if (c > 0) os << " | ";
            os << std::left << std::setw(static_cast<int>(width[c])) << grid[rix][c];
        }
        os << "\n";
        if (rix == 0) {
            for (std::size_t c = 0; c < width.size(); ++c) {
                if (c > 0) os << "-+-";
                os << std::string(width[c], '-');
            }
            os << "\n";
        }
    }
    return os.str();
}

}  // namespace lcva
