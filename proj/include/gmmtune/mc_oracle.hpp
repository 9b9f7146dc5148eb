#pragma once

#include <optional>

#include "gmmtune/detector.hpp"

namespace gmmtune {

struct EmpiricalSummary {
    std::size_t sample_count = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    double alarm_rate = 0.0;
    std::vector<double> bin_edges;     // histogram of the first residual component
    std::vector<std::size_t> bin_counts;
};

/// Exact-count merge of two batch summaries (shared bin edges required).
EmpiricalSummary merge(const EmpiricalSummary& a, const EmpiricalSummary& b);

/// Simulates `batches` independent trajectories (stream id = batch index),
/// discards burn_in steps per trajectory, counts z > alpha over the rest.
/// Deterministic given seed.
EmpiricalSummary empirical_false_alarm(const LtiSystem& sys, const Gmm& noise_eta,
                                       const std::optional<Gmm>& noise_v,
                                       const ChiSquaredDetector& det,
                                       std::size_t samples, std::size_t burn_in,
                                       std::uint64_t seed, int batches = 8);

/// Kolmogorov-Smirnov distance between an empirical sample and a 1-D mixture.
double ks_1d(std::vector<double> samples, const Gmm& model);

} // namespace gmmtune
