#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace gmmtune {

/// Plant + Luenberger observer:
///   x_{k+1} = F x_k + G u_k + v_k
///   y_k     = C x_k + eta_k
///   xhat_{k+1} = F xhat_k + G u_k + L (y_k - C xhat_k)
/// Dimension consistency is checked at construction; stability of F - L*C
/// is reported by validate_system and enforced by the steady-state ops.
struct LtiSystem {
    Eigen::MatrixXd F, G, C, L;
    int n = 0, p = 0, m = 0;

    LtiSystem(Eigen::MatrixXd F_, Eigen::MatrixXd G_, Eigen::MatrixXd C_,
              Eigen::MatrixXd L_);

    Eigen::MatrixXd observer_matrix() const { return F - L * C; }
};

struct StabilityReport {
    double spectral_radius = 0.0;
    bool stable = false;
    std::complex<double> worst_eigenvalue{0.0, 0.0};
};

StabilityReport validate_system(const LtiSystem& sys);

/// Throws std::runtime_error naming the offending eigenvalue if rho(F-LC) >= 1.
void require_stable(const LtiSystem& sys);

/// Residual as a linear combination of past noise samples:
///   r_k = sum_kappa A_kappa eta + sum_kappa B_kappa v
/// with A_1 = I, A_kappa = -C(F-LC)^{kappa-2} L, B_kappa = C(F-LC)^{kappa-1}.
struct ResidualWeights {
    int horizon = 0;
    std::vector<Eigen::MatrixXd> A; // size horizon
    std::vector<Eigen::MatrixXd> B; // size horizon-1
};

ResidualWeights residual_weights(const LtiSystem& sys, int k);

/// Smallest k with ||(F-LC)^{k-1}||_2 * max(1, ||L||_2) * ||C||_2 < tail_tol,
/// so every dropped A_kappa, B_kappa has spectral norm below tail_tol.
int settling_horizon(const LtiSystem& sys, double tail_tol);

struct LyapunovResult {
    Eigen::MatrixXd P;     // estimation-error covariance
    Eigen::MatrixXd Sigma; // residual covariance C*P*C^T + R2
};

/// Solves (F-LC) P (F-LC)^T - P + R1 + L R2 L^T = 0 by fixed-point iteration.
LyapunovResult lyapunov_residual_cov(const LtiSystem& sys,
                                     const Eigen::MatrixXd& R1,
                                     const Eigen::MatrixXd& R2);

using NoiseSampler = std::function<Eigen::VectorXd(std::mt19937_64&)>;

struct SimTrace {
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> estimates;
    std::vector<Eigen::VectorXd> outputs;
    std::vector<Eigen::VectorXd> residuals;
    std::vector<Eigen::VectorXd> inputs;
};

/// Deterministic given seed. An empty input sequence means u = 0 throughout.
SimTrace simulate(const LtiSystem& sys, const NoiseSampler& noise_v,
                  const NoiseSampler& noise_eta,
                  const std::vector<Eigen::VectorXd>& u, int steps,
                  std::uint64_t seed);

} // namespace gmmtune
