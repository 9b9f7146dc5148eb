#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gmmtune/residual_gmm.hpp"

namespace gmmtune {

/// Alarm rule z > alpha with z = (r - mean)^T cov^{-1} (r - mean).
struct ChiSquaredDetector {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    Eigen::MatrixXd chol; // lower triangular, chol * chol^T = cov
    double threshold = 0.0;

    static ChiSquaredDetector create(const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& cov, double alpha);
};

struct TuningReport {
    double alpha = 0.0;
    std::vector<double> mode_masses;      // M_j, probability of the sub-threshold
                                          // ellipsoid under each residual mode
    std::vector<double> mode_weights;     // pi_j of the reduced mixture
    double false_alarm = 0.0;             // 1 - sum pi_j M_j
    std::vector<double> per_mode_alphas;  // bank-of-detectors thresholds
    double quadrature_error_estimate = 0.0;
    std::string method;                   // closed-form-1d | polar-2d | spherical-3d | qmc
};

double distance_measure(const ChiSquaredDetector& det, const Eigen::VectorXd& r);

/// Regularized lower incomplete gamma P(s, x): series for x < s+1,
/// continued fraction otherwise.
double gamma_p_lower_regularized(double s, double x);

/// Inverse of P(s, .) in x, bracketed Newton to 1e-12. target in [0, 1).
double gamma_p_lower_inverse(double s, double target);

/// Gaussian-residual threshold: alpha* = 2 P^{-1}(1 - target_rate, p/2).
double gaussian_threshold(int p, double target_rate);

struct MassResult {
    double mass = 0.0;
    double error_estimate = 0.0;
    std::string method;
    bool converged = true;
};

/// Probability, under N(mode.mean, mode.cov), of the detector's ellipsoid
/// {r : (r-mean)^T cov^{-1} (r-mean) <= alpha}. Closed form for p=1,
/// adaptive Gauss-Legendre in polar/spherical coordinates for p=2,3,
/// shifted-Halton QMC for p>3.
MassResult mode_mass(const ChiSquaredDetector& det, const GaussianMode& mode);

TuningReport false_alarm_rate(const ResidualModel& model, double alpha);

/// Bisection on the rate: |A(alpha) - target| <= 1e-4 or bracket < 1e-10.
std::pair<double, TuningReport> tune_threshold(const ResidualModel& model,
                                               double target_rate);

/// Bank-of-detectors thresholds alpha_j = 2 P^{-1}(M_j, p/2); infinity when
/// M_j = 1.
std::vector<double> per_mode_thresholds(const std::vector<double>& mode_masses,
                                        int p);

} // namespace gmmtune
