#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "lcva/errors.hpp"
#include "lcva/matrix.hpp"
#include "lcva/rng.hpp"

namespace lcva {

// Log-domain safety bounds. Test-visible constants: probabilities are clamped
// to [kProbClampLo, kProbClampHi] and every learned standard deviation is
// softplus-transformed and floored at kSigmaFloor.
inline constexpr double kProbClampLo = 1e-7;
inline constexpr double kProbClampHi = 1.0 - 1e-7;
inline constexpr double kSigmaFloor = 1e-4;

inline constexpr double kLnTwoPi = 1.8378770664093454836;  // ln(2*pi)

inline double clamp_probability(double p) {
    return std::clamp(p, kProbClampLo, kProbClampHi);
}

inline double logistic(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log N(x; mu, sigma^2)
inline double gaussian_log_prob(double x, double mu, double sigma) {
    if (!(sigma > 0.0)) {
        throw DomainError("gaussian_log_prob: sigma must be positive, got " +
                          std::to_string(sigma));
    }
    const double z = (x - mu) / sigma;
    return -0.5 * kLnTwoPi - std::log(sigma) - 0.5 * z * z;
}

// t*ln(p) + (1-t)*ln(1-p); callers clamp p via clamp_probability first.
inline double bernoulli_log_prob(int t, double p) {
    if (!(p > 0.0) || !(p < 1.0)) {
        throw DomainError("bernoulli_log_prob: p must lie in (0,1), got " + std::to_string(p));
    }
    return t != 0 ? std::log(p) : std::log1p(-p);
}

// KL(N(mu, diag(sigma^2)) || N(0, I)) = sum_j 0.5*(mu_j^2 + sigma_j^2 - ln sigma_j^2 - 1)
inline double gaussian_kl_to_standard(const Vec& mu, const Vec& sigma) {
    if (mu.size() != sigma.size()) {
        throw ShapeError("gaussian_kl_to_standard: mu/sigma length mismatch");
    }
    double kl = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
        if (!(sigma[j] > 0.0)) {
            throw DomainError("gaussian_kl_to_standard: sigma[" + std::to_string(j) +
                              "] must be positive");
        }
        kl += 0.5 * (mu[j] * mu[j] + sigma[j] * sigma[j] - 2.0 * std::log(sigma[j]) - 1.0);
    }
    return kl;
}

// mu + sigma .* eps with eps ~ N(0, I). sigma may contain zeros.
inline Vec reparameterize(const Vec& mu, const Vec& sigma, SeededRng& rng) {
    if (mu.size() != sigma.size()) {
        throw ShapeError("reparameterize: mu/sigma length mismatch");
    }
    Vec z(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) {
        if (sigma[j] < 0.0) {
            throw DomainError("reparameterize: sigma[" + std::to_string(j) + "] is negative");
        }
        z[j] = mu[j] + sigma[j] * rng.normal();
    }
    return z;
}

}  // namespace lcva
