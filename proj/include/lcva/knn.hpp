#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

#include "lcva/dataset.hpp"
#include "lcva/errors.hpp"

namespace lcva {

// Per-feature z-scoring used before K-NN distance computation. Constant
// features get a unit denominator so they simply drop out of distances.
inline std::vector<Vec> standardize_covariates(const std::vector<UnitRecord>& units) {
    const std::size_t n = units.size();
    const std::size_t d = n == 0 ? 0 : units.front().covariates.size();
    Vec mean(d, 0.0), sd(d, 0.0);
    for (const auto& u : units) {
        for (std::size_t j = 0; j < d; ++j) mean[j] += u.covariates[j];
    }
    for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
    for (const auto& u : units) {
        for (std::size_t j = 0; j < d; ++j) {
            const double c = u.covariates[j] - mean[j];
            sd[j] += c * c;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        sd[j] = std::sqrt(sd[j] / static_cast<double>(n));
        if (sd[j] < 1e-12) sd[j] = 1.0;
    }
    std::vector<Vec> out(n, Vec(d));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out[i][j] = (units[i].covariates[j] - mean[j]) / sd[j];
        }
    }
    return out;
}

// Directed K-NN graph on z-scored covariates (Euclidean distance, self
// excluded). Ties break toward the lower unit index; each unit contributes
// exactly K pairs ordered nearest-first.
inline std::vector<PairSample> build_knn_graph(const std::vector<UnitRecord>& units,
                                               std::size_t k) {
    if (k == 0) throw UsageError("build_knn_graph: K must be at least 1");
    if (units.size() < k + 1) {
        throw UsageError("build_knn_graph: need at least K+1 units, have " +
                         std::to_string(units.size()));
    }
    const auto x = standardize_covariates(units);
    const std::size_t n = units.size();
    const std::size_t d = x.front().size();

    using Cand = std::pair<double, std::size_t>;  // (squared distance, index)
    std::vector<PairSample> pairs;
    pairs.reserve(n * k);
    std::vector<Cand> heap;  // max-heap holding the current K best
    for (std::size_t i = 0; i < n; ++i) {
        heap.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double dist = 0.0;
            for (std::size_t f = 0; f < d; ++f) {
                const double diff = x[i][f] - x[j][f];
                dist += diff * diff;
            }
            const Cand c{dist, j};
            if (heap.size() < k) {
                heap.push_back(c);
                std::push_heap(heap.begin(), heap.end());
            } else if (c < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = c;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        std::sort_heap(heap.begin(), heap.end());
        for (const auto& [dist, j] : heap) pairs.push_back(PairSample{i, j});
    }
    return pairs;
}

}  // namespace lcva
