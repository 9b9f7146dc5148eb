#pragma once

#include <optional>

#include "gmmtune/gmm.hpp"
#include "gmmtune/lti.hpp"

namespace gmmtune {

/// Steady-state residual distribution with its provenance.
struct ResidualModel {
    Gmm mixture;
    Eigen::VectorXd overall_mean;
    Eigen::MatrixXd overall_cov;
    int k_star = 0;
    ReductionConfig reduction;
    double mode_count_exact = 0.0; // m1^k* * m2^(k*-1), un-reduced
};

/// Per-mode hypothetical Gaussian measurement noises that reproduce each
/// residual mode when applied to the system in isolation.
struct EquivalentNoise {
    Eigen::MatrixXd E; // truncated sum of the A_kappa weights
    double condition_number = 0.0;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
};

/// One-shot enumeration of all m1^k * m2^(k-1) residual modes via a
/// mixed-radix counter. Guarded: throws std::length_error above 1e6 modes.
Gmm residual_gmm_exact(const LtiSystem& sys, const Gmm& noise_eta,
                       const std::optional<Gmm>& noise_v, int k);

/// Repeated convolution of affine-mapped noise mixtures with interleaved
/// reduction. Equals residual_gmm_exact when thresholds are zero.
Gmm residual_gmm_iterative(const LtiSystem& sys, const Gmm& noise_eta,
                           const std::optional<Gmm>& noise_v, int k,
                           const ReductionConfig& reduction);

ResidualModel steady_state_residual(const LtiSystem& sys, const Gmm& noise_eta,
                                    const std::optional<Gmm>& noise_v,
                                    double tail_tol,
                                    const ReductionConfig& reduction);

/// Same pipeline with an explicit horizon instead of the tail-tolerance rule.
ResidualModel steady_state_residual_at(const LtiSystem& sys, const Gmm& noise_eta,
                                       const std::optional<Gmm>& noise_v, int k_star,
                                       const ReductionConfig& reduction);

/// Overall residual moments at horizon k straight from the linear weights,
/// without building the mixture (cheap; used for auto reduction thresholds).
Moments residual_overall_moments(const LtiSystem& sys, const Gmm& noise_eta,
                                 const std::optional<Gmm>& noise_v, int k);

/// Reverse-engineers per-mode Gaussian measurement noises: the noise for mode
/// j is chosen so that feeding it alone through the residual propagation at
/// k_star reproduces (mu_j, K_j). Throws on singular steady-state gain.
EquivalentNoise equivalent_noise(const ResidualModel& model, const LtiSystem& sys,
                                 int k_star);

} // namespace gmmtune
