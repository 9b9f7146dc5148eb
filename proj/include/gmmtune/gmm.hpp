#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace gmmtune {

/// One weighted Gaussian component of a mixture.
struct GaussianMode {
    double weight;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Gaussian mixture over R^d. Weights sum to 1, all modes share `dim`.
struct Gmm {
    int dim = 0;
    std::vector<GaussianMode> modes;

    static Gmm single(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);
    /// Point mass at zero in R^d (zero covariance).
    static Gmm zero(int d);

    /// Throws std::invalid_argument on weight/dimension/PSD violations.
    void validate() const;
};

struct Moments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Mode-merging thresholds. Zero thresholds disable reduction entirely.
struct ReductionConfig {
    double d_mu = 0.0;
    double d_K = 0.0;
    /// Moment-matched merge (preserves overall mean exactly). When false,
    /// the cluster keeps its first member's parameters and only weights add.
    bool moment_match = true;
};

/// Each mode (w, mu, K) -> (w, Q*mu + shift, Q*K*Q^T).
Gmm affine_map(const Gmm& g, const Eigen::MatrixXd& Q, const Eigen::VectorXd& shift);

/// Distribution of X + Y for independent X ~ a, Y ~ b. Mode count |a|*|b|.
Gmm independent_sum(const Gmm& a, const Gmm& b);

/// Overall mean and covariance of the mixture.
Moments moments(const Gmm& g);

double pdf(const Gmm& g, const Eigen::VectorXd& x);

/// CDF of a 1-D mixture via per-mode error functions. Throws on dim != 1.
double cdf_1d(const Gmm& g, double x);

std::vector<Eigen::VectorXd> sample(const Gmm& g, std::size_t count, std::uint64_t seed);

/// Draw one sample using the caller's generator state.
Eigen::VectorXd sample_one(const Gmm& g, std::mt19937_64& rng);

/// Greedy first-fit mode merging: a mode joins the first cluster whose
/// representative (first member) is within d_mu in mean (Euclidean) and
/// d_K in covariance (Frobenius).
Gmm reduce(const Gmm& g, const ReductionConfig& cfg);

/// Reduction thresholds from the spread of the mixture:
/// d_mu = 0.01*||overall std||, d_K = 0.01*||overall cov||_F.
ReductionConfig auto_reduction(const Gmm& g);

struct EmResult {
    Gmm model;
    std::vector<double> loglik_trace;
    bool reseeded = false;   // a degenerate component forced a restart
    bool degenerate = false; // still degenerate after the retry
};

/// Full-covariance EM with k-means++ initialization.
EmResult em_fit(const std::vector<Eigen::VectorXd>& samples, int mode_count,
                std::uint64_t seed);

} // namespace gmmtune
