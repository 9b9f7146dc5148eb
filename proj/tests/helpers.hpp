#pragma once

#include <random>

#include "gmmtune/detector.hpp"
#include "gmmtune/mc_oracle.hpp"

namespace testutil {

using namespace gmmtune;

// Worked single-output example: 2-state plant, scalar measurement.
inline LtiSystem example_system() {
    Eigen::MatrixXd F(2, 2), G(2, 1), C(1, 2), L(2, 1);
    F << 0.8, 0.2, -0.25, 0.1;
    G.setZero();
    C << 0.5, 0.5;
    L << 0.3, -0.3;
    return LtiSystem(F, G, C, L);
}

// Six-mode measurement-noise mixture for the example system (weights
// normalized; the printed coefficients sum to 1.0001).
inline Gmm example_noise() {
    const double w[6] = {0.0847, 0.2012, 0.1184, 0.3200, 0.1889, 0.0869};
    const double mu[6] = {-7.0877, -4.4709, -2.0082, 1.2318, 4.5240, 7.0504};
    const double K[6] = {2.1997, 0.4471, 0.2062, 1.0392, 0.3858, 2.2329};
    double total = 0.0;
    for (double x : w) total += x;
    Gmm g;
    g.dim = 1;
    for (int i = 0; i < 6; ++i) {
        Eigen::VectorXd m(1);
        m << mu[i];
        Eigen::MatrixXd c(1, 1);
        c << K[i];
        g.modes.push_back({w[i] / total, m, c});
    }
    return g;
}

inline Eigen::MatrixXd random_spd(int d, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A(i, j) = gauss(rng);
    return scale * (A * A.transpose()) +
           0.1 * scale * Eigen::MatrixXd::Identity(d, d);
}

// Random stable plant/observer pair with p outputs and n states.
inline LtiSystem random_stable_system(int n, int p, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    while (true) {
        Eigen::MatrixXd F(n, n), C(p, n), L(n, p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) F(i, j) = 0.4 * gauss(rng);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < n; ++j) C(i, j) = gauss(rng);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j) L(i, j) = 0.2 * gauss(rng);
        LtiSystem sys(F, Eigen::MatrixXd::Zero(n, 1), C, L);
        if (validate_system(sys).spectral_radius < 0.9) return sys;
    }
}

inline Gmm gaussian_noise(const Eigen::MatrixXd& cov) {
    return Gmm::single(Eigen::VectorXd::Zero(cov.rows()), cov);
}

// Simpson's rule on a uniform grid, for pdf-normalization checks.
template <typename F>
double simpson(F f, double a, double b, int intervals) {
    if (intervals % 2 != 0) ++intervals;
    const double h = (b - a) / intervals;
    double total = f(a) + f(b);
    for (int i = 1; i < intervals; ++i)
        total += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return total * h / 3.0;
}

} // namespace testutil
