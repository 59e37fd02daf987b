#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "lcva/dataset.hpp"
#include "lcva/errors.hpp"
#include "lcva/inference.hpp"
#include "lcva/rng.hpp"

namespace lcva {

struct ForestConfig {
    std::size_t tree_count = 100;
    std::size_t max_depth = 10;
    std::size_t min_leaf_size = 5;
    std::uint64_t seed = 0;

    void validate() const {
        if (tree_count == 0) throw UsageError("forest: tree_count must be positive");
        if (min_leaf_size == 0) throw UsageError("forest: min_leaf_size must be positive");
    }
};

// Axis-aligned split node; split_feature < 0 marks a leaf.
struct TreeNode {
    int split_feature = -1;
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    double leaf_value = 0.0;
};

using Tree = std::vector<TreeNode>;

inline double tree_predict(const Tree& tree, const Vec& features) {
    std::size_t node = 0;
    while (tree[node].split_feature >= 0) {
        node = features[static_cast<std::size_t>(tree[node].split_feature)] <=
                       tree[node].threshold
                   ? tree[node].left
                   : tree[node].right;
    }
    return tree[node].leaf_value;
}

// Bootstrap-aggregated regression trees on [x_u, t_u, t_v] -> y_u.
// Variance-reduction splits over ceil(sqrt(m)) features sampled per node.
struct RegressionForest {
    std::vector<Tree> trees;
    ForestConfig config;
    std::size_t input_dim = 0;

    double predict(const Vec& features) const {
        if (features.size() != input_dim) {
            throw ShapeError("forest: feature length mismatch");
        }
        double s = 0.0;
        for (const auto& t : trees) s += tree_predict(t, features);
        return s / static_cast<double>(trees.size());
    }
};

namespace detail {

struct TreeBuilder {
    const std::vector<Vec>& rows;
    const Vec& targets;
    const ForestConfig& cfg;
    std::size_t n_split_features;
    SeededRng rng;
    Tree tree;

    // Deterministic feature subsample without replacement.
    std::vector<std::size_t> sample_features(std::size_t m) {
        std::vector<std::size_t> all(m);
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t i = 0; i < n_split_features; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.next_below(m - i));
            std::swap(all[i], all[j]);
        }
        all.resize(n_split_features);
        std::sort(all.begin(), all.end());
        return all;
    }

    std::size_t build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
                      std::size_t depth) {
        const std::size_t node_id = tree.size();
        tree.push_back(TreeNode{});

        const std::size_t n = hi - lo;
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            sum += targets[idx[i]];
            sum_sq += targets[idx[i]] * targets[idx[i]];
        }
        const double mean = sum / static_cast<double>(n);
        tree[node_id].leaf_value = mean;

        const double sse = sum_sq - sum * mean;
        if (depth >= cfg.max_depth || n < 2 * cfg.min_leaf_size || sse <= 1e-12) {
            return node_id;
        }

        // Best split: minimize child SSE sum; ties keep the first candidate
        // (lowest feature index, then lowest threshold).
        const std::size_t m = rows.front().size();
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_score = sse;
        std::vector<std::pair<double, double>> vals;  // (feature value, target)
        for (const std::size_t f : sample_features(m)) {
            vals.clear();
            for (std::size_t i = lo; i < hi; ++i) {
                vals.emplace_back(rows[idx[i]][f], targets[idx[i]]);
            }
            std::sort(vals.begin(), vals.end());
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += vals[i].second;
                left_sq += vals[i].second * vals[i].second;
                const std::size_t n_left = i + 1;
                if (n_left < cfg.min_leaf_size || n - n_left < cfg.min_leaf_size) continue;
                if (vals[i].first == vals[i + 1].first) continue;  // not a boundary
                const double right_sum = sum - left_sum;
                const double right_sq = sum_sq - left_sq;
                const double score =
                    (left_sq - left_sum * left_sum / static_cast<double>(n_left)) +
                    (right_sq - right_sum * right_sum / static_cast<double>(n - n_left));
                if (score < best_score - 1e-12) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                }
            }
        }
        if (best_feature < 0) return node_id;

        const auto mid = std::partition(idx.begin() + static_cast<long>(lo),
                                        idx.begin() + static_cast<long>(hi),
                                        [&](std::size_t r) {
                                            return rows[r][static_cast<std::size_t>(best_feature)] <=
                                                   best_threshold;
                                        });
        const std::size_t split = static_cast<std::size_t>(mid - idx.begin());
        // Stable child order for determinism regardless of partition details.
        std::sort(idx.begin() + static_cast<long>(lo), idx.begin() + static_cast<long>(split));
        std::sort(idx.begin() + static_cast<long>(split), idx.begin() + static_cast<long>(hi));

        tree[node_id].split_feature = best_feature;
        tree[node_id].threshold = best_threshold;
        tree[node_id].left = build(idx, lo, split, depth + 1);
        tree[node_id].right = build(idx, split, hi, depth + 1);
        return node_id;
    }
};

}  // namespace detail

// Generic trainer over prebuilt rows; pair-sample assembly lives in
// fit_forest below.
inline RegressionForest fit_forest_rows(const std::vector<Vec>& rows, const Vec& targets,
                                        const ForestConfig& config) {
    config.validate();
    if (rows.empty() || rows.size() != targets.size()) {
        throw UsageError("forest: empty or mismatched training rows");
    }
    if (rows.size() < config.min_leaf_size) {
        throw UsageError("forest: need at least min_leaf_size samples");
    }
    RegressionForest forest;
    forest.config = config;
    forest.input_dim = rows.front().size();

    const std::size_t n = rows.size();
    const std::size_t m = forest.input_dim;
    const auto n_split_features =
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));

    SeededRng root_rng(config.seed);
    for (std::size_t t = 0; t < config.tree_count; ++t) {
        detail::TreeBuilder builder{rows, targets, config, n_split_features,
                                    root_rng.derive(t), {}};
        std::vector<std::size_t> bootstrap(n);
        for (auto& b : bootstrap) b = static_cast<std::size_t>(builder.rng.next_below(n));
        std::sort(bootstrap.begin(), bootstrap.end());
        builder.build(bootstrap, 0, n, 0);
        forest.trees.push_back(std::move(builder.tree));
    }
    return forest;
}

inline RegressionForest fit_forest(const PairedDataset& dataset, const ForestConfig& config) {
    std::vector<Vec> rows;
    Vec targets;
    rows.reserve(dataset.pairs.size());
    targets.reserve(dataset.pairs.size());
    for (const auto& p : dataset.pairs) {
        const auto& ego = dataset.units[p.ego];
        Vec f = ego.covariates;
        f.push_back(static_cast<double>(ego.treatment));
        f.push_back(static_cast<double>(dataset.units[p.peer].treatment));
        rows.push_back(std::move(f));
        targets.push_back(ego.outcome);
    }
    return fit_forest_rows(rows, targets, config);
}

inline PotentialOutcomes forest_potential_outcomes(const RegressionForest& forest,
                                                   const PairedDataset& dataset,
                                                   const PairSample& pair) {
    const auto& ego = dataset.units[pair.ego];
    const double t_v = static_cast<double>(dataset.units[pair.peer].treatment);
    Vec f = ego.covariates;
    f.push_back(0.0);
    f.push_back(t_v);
    PotentialOutcomes out;
    out.y_hat_t0 = forest.predict(f);
    f[f.size() - 2] = 1.0;
    out.y_hat_t1 = forest.predict(f);
    return out;
}

}  // namespace lcva
