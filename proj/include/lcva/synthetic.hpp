#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcva/dataset.hpp"
#include "lcva/errors.hpp"
#include "lcva/knn.hpp"
#include "lcva/prob.hpp"
#include "lcva/rng.hpp"

namespace lcva {

// Proxy noise on covariates; outcome noise is configurable per spec.
inline constexpr double kProxyNoiseSd = 0.1;

// Configuration of the confounded-spillover generator:
//   z ~ N(0, I)                         latent confounder
//   x = A z + proxy noise               observed proxies
//   t ~ Bernoulli(logistic(c * w.z))    confounded treatment
//   y(t_u, t_v) = b.z + tau*t_u + gamma*t_v + eps
// Pairs come from a K-NN graph on x; each unit's factual outcome uses its
// nearest neighbor's treatment as the peer arm.
struct GeneratorSpec {
    std::size_t n_units = 2000;
    std::size_t feature_dim = 10;
    std::size_t latent_dim = 3;
    std::size_t k_neighbors = 1;
    double tau = 2.0;
    double gamma = 1.0;
    double confounding = 1.0;
    double noise_sd = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_units < 2) throw UsageError("generator: n_units must be at least 2");
        if (feature_dim == 0) throw UsageError("generator: feature_dim must be positive");
        if (latent_dim == 0) throw UsageError("generator: latent_dim must be positive");
        if (k_neighbors == 0 || k_neighbors >= n_units) {
            throw UsageError("generator: require 1 <= k_neighbors < n_units");
        }
        if (noise_sd < 0.0) throw UsageError("generator: noise_sd must be nonnegative");
        if (confounding < 0.0) throw UsageError("generator: confounding must be nonnegative");
    }
};

inline nlohmann::ordered_json generator_spec_to_json(const GeneratorSpec& spec) {
    return nlohmann::ordered_json{
        {"n_units", spec.n_units},       {"feature_dim", spec.feature_dim},
        {"latent_dim", spec.latent_dim}, {"k_neighbors", spec.k_neighbors},
        {"tau", spec.tau},               {"gamma", spec.gamma},
        {"confounding", spec.confounding}, {"noise_sd", spec.noise_sd},
        {"seed", spec.seed}};
}

template <typename Json>
GeneratorSpec parse_generator_spec(const Json& j) {
    GeneratorSpec spec;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "n_units") {
            spec.n_units = it.value().template get<std::size_t>();
        } else if (key == "feature_dim") {
            spec.feature_dim = it.value().template get<std::size_t>();
        } else if (key == "latent_dim") {
            spec.latent_dim = it.value().template get<std::size_t>();
        } else if (key == "k_neighbors") {
            spec.k_neighbors = it.value().template get<std::size_t>();
        } else if (key == "tau") {
            spec.tau = it.value().template get<double>();
        } else if (key == "gamma") {
            spec.gamma = it.value().template get<double>();
        } else if (key == "confounding") {
            spec.confounding = it.value().template get<double>();
        } else if (key == "noise_sd") {
            spec.noise_sd = it.value().template get<double>();
        } else if (key == "seed") {
            spec.seed = it.value().template get<std::uint64_t>();
        } else {
            throw UsageError("generator spec: unknown key '" + key + "'");
        }
    }
    spec.validate();
    return spec;
}

// Ground truth kept alongside a generated dataset. potential_outcomes[i]
// holds y_i(t_u, t_v) at index 2*t_u + t_v, with the noise draw shared across
// arms so per-unit effects are exact: own-arm flip = tau, peer flip = gamma.
struct SyntheticTruth {
    double true_ate = 0.0;
    double tau = 0.0;
    double gamma = 0.0;
    std::vector<std::array<double, 4>> potential_outcomes;
    std::vector<std::size_t> primary_peer;
};

struct SyntheticDataset {
    PairedDataset data;
    SyntheticTruth truth;
};

inline SyntheticDataset generate_synthetic_spillover(const GeneratorSpec& spec) {
    spec.validate();
    SeededRng rng(spec.seed);
    const std::size_t n = spec.n_units;
    const std::size_t d = spec.feature_dim;
    const std::size_t kz = spec.latent_dim;

    // Fixed structural parameters, drawn once per seed.
    Matrix a(d, kz);
    const double a_scale = 1.0 / std::sqrt(static_cast<double>(kz));
    for (double& v : a.data()) v = a_scale * rng.normal();
    auto unit_vector = [&] {
        Vec v = rng.normal_vec(kz);
        double norm = std::sqrt(dot(v, v));
        if (norm < 1e-12) norm = 1.0;
        for (double& x : v) x /= norm;
        return v;
    };
    const Vec w = unit_vector();  // treatment loading
    const Vec b = unit_vector();  // outcome loading

    std::vector<Vec> z(n);
    SyntheticDataset out;
    out.data.feature_dim = d;
    out.data.provenance.generator_seed = spec.seed;
    out.data.units.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = rng.normal_vec(kz);
        UnitRecord& u = out.data.units[i];
        u.id = "u" + std::to_string(i);
        u.covariates = matvec(a, z[i]);
        for (double& x : u.covariates) x += kProxyNoiseSd * rng.normal();
        u.treatment = rng.bernoulli(logistic(spec.confounding * dot(w, z[i])));
    }

    out.data.pairs = build_knn_graph(out.data.units, spec.k_neighbors);

    // Nearest neighbor = first of each ego's K pairs.
    out.truth.primary_peer.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.truth.primary_peer[i] = out.data.pairs[i * spec.k_neighbors].peer;
    }

    out.truth.tau = spec.tau;
    out.truth.gamma = spec.gamma;
    out.truth.true_ate = spec.tau;
    out.truth.potential_outcomes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double base = dot(b, z[i]) + spec.noise_sd * rng.normal();
        for (int tu = 0; tu <= 1; ++tu) {
            for (int tv = 0; tv <= 1; ++tv) {
                out.truth.potential_outcomes[i][static_cast<std::size_t>(2 * tu + tv)] =
                    base + spec.tau * tu + spec.gamma * tv;
            }
        }
        UnitRecord& u = out.data.units[i];
        const int t_peer = out.data.units[out.truth.primary_peer[i]].treatment;
        u.outcome = out.truth.potential_outcomes[i][static_cast<std::size_t>(2 * u.treatment + t_peer)];
        u.counterfactual_outcome =
            out.truth.potential_outcomes[i][static_cast<std::size_t>(2 * (1 - u.treatment) + t_peer)];
    }
    out.data.validate();
    return out;
}

}  // namespace lcva
