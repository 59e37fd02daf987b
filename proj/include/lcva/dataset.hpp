#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lcva/errors.hpp"
#include "lcva/matrix.hpp"
#include "lcva/rng.hpp"

namespace lcva {

// One unit: covariates, binary treatment, factual outcome and, when a dataset
// provides it, the ground-truth (or matched) counterfactual outcome.
// randomized_subset marks membership in a randomized-trial subgroup.
struct UnitRecord {
    std::string id;
    Vec covariates;
    int treatment = 0;
    double outcome = 0.0;
    std::optional<double> counterfactual_outcome;
    bool randomized_subset = false;
};

// Directed (ego, peer) pair of unit indices; the training/evaluation atom.
struct PairSample {
    std::size_t ego = 0;
    std::size_t peer = 0;
};

struct DatasetProvenance {
    std::vector<std::pair<std::string, std::string>> source_hashes;  // (path, hash)
    std::optional<std::uint64_t> generator_seed;
};

struct PairedDataset {
    std::vector<UnitRecord> units;
    std::vector<PairSample> pairs;
    std::size_t feature_dim = 0;
    DatasetProvenance provenance;

    void validate() const {
        for (const auto& u : units) {
            if (u.covariates.size() != feature_dim) {
                throw ShapeError("dataset: unit '" + u.id + "' has " +
                                 std::to_string(u.covariates.size()) + " features, expected " +
                                 std::to_string(feature_dim));
            }
            if (u.treatment != 0 && u.treatment != 1) {
                throw DomainError("dataset: unit '" + u.id + "' has non-binary treatment");
            }
        }
        for (const auto& p : pairs) {
            if (p.ego >= units.size() || p.peer >= units.size()) {
                throw ShapeError("dataset: pair index out of range");
            }
            if (p.ego == p.peer) {
                throw DomainError("dataset: self-pair at unit index " + std::to_string(p.ego));
            }
        }
    }
};

inline std::size_t count_treated(const std::vector<UnitRecord>& units) {
    return static_cast<std::size_t>(
        std::count_if(units.begin(), units.end(), [](const auto& u) { return u.treatment == 1; }));
}

inline std::size_t count_control(const std::vector<UnitRecord>& units) {
    return units.size() - count_treated(units);
}

// Affine constants of the [0,1] outcome scaling, reported alongside metrics.
struct OutcomeScaling {
    double min = 0.0;
    double max = 1.0;

    double apply(double y) const { return (y - min) / (max - min); }
};

// Rescales factual (and any counterfactual) outcomes to [0,1] in place.
inline OutcomeScaling scale_outcomes_unit_interval(std::vector<UnitRecord>& units) {
    if (units.empty()) throw UsageError("scale_outcomes: no units");
    double lo = units.front().outcome;
    double hi = lo;
    for (const auto& u : units) {
        lo = std::min(lo, u.outcome);
        hi = std::max(hi, u.outcome);
    }
    if (!(hi > lo)) {
        throw UsageError("scale_outcomes: outcomes are constant (min == max == " +
                         std::to_string(lo) + ")");
    }
    const OutcomeScaling scaling{lo, hi};
    for (auto& u : units) {
        u.outcome = scaling.apply(u.outcome);
        if (u.counterfactual_outcome) {
            u.counterfactual_outcome = scaling.apply(*u.counterfactual_outcome);
        }
    }
    return scaling;
}

// Unit-level split: a pair follows its ego, so no test ego ever appears as a
// train ego. Peers may overlap between sides. Both sides keep the full unit
// table; only the pair lists are partitioned.
inline std::pair<PairedDataset, PairedDataset> split_pairs(const PairedDataset& dataset,
                                                           double train_fraction,
                                                           std::uint64_t seed) {
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
        throw UsageError("split_pairs: train_fraction must lie in (0,1)");
    }
    std::vector<std::size_t> order(dataset.units.size());
    std::iota(order.begin(), order.end(), 0);
    SeededRng rng(seed);
    rng.shuffle(order);

    const std::size_t n_train =
        static_cast<std::size_t>(train_fraction * static_cast<double>(order.size()));
    std::vector<char> in_train(dataset.units.size(), 0);
    for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = 1;

    PairedDataset train{dataset.units, {}, dataset.feature_dim, dataset.provenance};
    PairedDataset test{dataset.units, {}, dataset.feature_dim, dataset.provenance};
    for (const auto& p : dataset.pairs) {
        (in_train[p.ego] ? train.pairs : test.pairs).push_back(p);
    }
    if (train.pairs.empty() || test.pairs.empty()) {
        throw UsageError("split_pairs: a side of the split has no pairs");
    }
    return {std::move(train), std::move(test)};
}

}  // namespace lcva
