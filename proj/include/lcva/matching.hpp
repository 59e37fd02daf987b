#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "lcva/dataset.hpp"
#include "lcva/errors.hpp"

namespace lcva {

// Fills each unit's counterfactual outcome with the factual outcome of the
// nearest opposite-treatment unit under squared L2 on raw covariates.
// Ties break toward the lower index.
inline void synthesize_counterfactual_matching(std::vector<UnitRecord>& units) {
    const std::size_t n_treated = count_treated(units);
    if (n_treated == 0 || n_treated == units.size()) {
        throw UsageError("matching: both treatment groups must be nonempty");
    }
    const std::size_t n = units.size();
    std::vector<double> best_dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> best_idx(n, n);
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 0; v < n; ++v) {
            if (units[v].treatment == units[u].treatment) continue;
            double dist = 0.0;
            const Vec& a = units[u].covariates;
            const Vec& b = units[v].covariates;
            for (std::size_t f = 0; f < a.size(); ++f) {
                const double diff = a[f] - b[f];
                dist += diff * diff;
            }
            if (dist < best_dist[u]) {
                best_dist[u] = dist;
                best_idx[u] = v;
            }
        }
    }
    for (std::size_t u = 0; u < n; ++u) {
        units[u].counterfactual_outcome = units[best_idx[u]].outcome;
    }
}

}  // namespace lcva
