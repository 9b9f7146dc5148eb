#include "gmmtune/lti.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <sstream>
#include <stdexcept>

namespace gmmtune {

namespace {

double spectral_norm(const Eigen::MatrixXd& M) {
    if (M.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

} // namespace

LtiSystem::LtiSystem(Eigen::MatrixXd F_, Eigen::MatrixXd G_, Eigen::MatrixXd C_,
                     Eigen::MatrixXd L_)
    : F(std::move(F_)), G(std::move(G_)), C(std::move(C_)), L(std::move(L_)) {
    n = static_cast<int>(F.rows());
    p = static_cast<int>(C.rows());
    m = static_cast<int>(G.cols());
    if (F.cols() != n) throw std::invalid_argument("LtiSystem: F must be square");
    if (G.rows() != n) throw std::invalid_argument("LtiSystem: G must be n x m");
    if (C.cols() != n) throw std::invalid_argument("LtiSystem: C must be p x n");
    if (L.rows() != n || L.cols() != p)
        throw std::invalid_argument("LtiSystem: L must be n x p");
    if (n < 1 || p < 1) throw std::invalid_argument("LtiSystem: empty dimensions");
}

StabilityReport validate_system(const LtiSystem& sys) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(sys.observer_matrix());
    StabilityReport rep;
    for (int i = 0; i < sys.n; ++i) {
        const double mag = std::abs(es.eigenvalues()(i));
        if (mag >= rep.spectral_radius) {
            rep.spectral_radius = mag;
            rep.worst_eigenvalue = es.eigenvalues()(i);
        }
    }
    rep.stable = rep.spectral_radius < 1.0;
    return rep;
}

void require_stable(const LtiSystem& sys) {
    const StabilityReport rep = validate_system(sys);
    if (!rep.stable) {
        std::ostringstream msg;
        msg << "system unstable: rho(F - LC) = " << rep.spectral_radius
            << " at eigenvalue " << rep.worst_eigenvalue.real();
        if (rep.worst_eigenvalue.imag() != 0.0)
            msg << (rep.worst_eigenvalue.imag() > 0 ? "+" : "")
                << rep.worst_eigenvalue.imag() << "i";
        throw std::runtime_error(msg.str());
    }
}

ResidualWeights residual_weights(const LtiSystem& sys, int k) {
    if (k < 1) throw std::domain_error("residual_weights: k must be >= 1");
    const Eigen::MatrixXd Fo = sys.observer_matrix();
    ResidualWeights w;
    w.horizon = k;
    w.A.reserve(k);
    w.B.reserve(k > 0 ? k - 1 : 0);
    w.A.push_back(Eigen::MatrixXd::Identity(sys.p, sys.p));
    // power = (F - LC)^{kappa-2} when pushing A_kappa; the same power serves
    // B_{kappa-1} = C (F-LC)^{kappa-2}.
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(sys.n, sys.n);
    for (int kappa = 2; kappa <= k; ++kappa) {
        w.A.push_back(-sys.C * power * sys.L);
        w.B.push_back(sys.C * power);
        power = power * Fo;
    }
    return w;
}

int settling_horizon(const LtiSystem& sys, double tail_tol) {
    if (tail_tol <= 0.0)
        throw std::domain_error("settling_horizon: tail_tol must be positive");
    require_stable(sys);
    const double factor = std::max(1.0, spectral_norm(sys.L)) * spectral_norm(sys.C);
    const Eigen::MatrixXd Fo = sys.observer_matrix();
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(sys.n, sys.n); // (F-LC)^{k-1}
    for (int k = 1; k <= 100000; ++k) {
        if (spectral_norm(power) * factor < tail_tol) return k;
        power = power * Fo;
    }
    throw std::runtime_error("settling_horizon: no k found (system too close to instability)");
}

LyapunovResult lyapunov_residual_cov(const LtiSystem& sys,
                                     const Eigen::MatrixXd& R1,
                                     const Eigen::MatrixXd& R2) {
    if (R1.rows() != sys.n || R1.cols() != sys.n)
        throw std::invalid_argument("lyapunov_residual_cov: R1 must be n x n");
    if (R2.rows() != sys.p || R2.cols() != sys.p)
        throw std::invalid_argument("lyapunov_residual_cov: R2 must be p x p");
    require_stable(sys);
    const Eigen::MatrixXd Fo = sys.observer_matrix();
    const Eigen::MatrixXd Q = R1 + sys.L * R2 * sys.L.transpose();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(sys.n, sys.n);
    for (int iter = 0; iter < 1000000; ++iter) {
        const Eigen::MatrixXd next = Fo * P * Fo.transpose() + Q;
        const double update = (next - P).norm();
        P = next;
        if (update < 1e-12 * std::max(1.0, P.norm())) break;
    }
    P = 0.5 * (P + P.transpose());
    LyapunovResult res;
    res.P = P;
    res.Sigma = sys.C * P * sys.C.transpose() + R2;
    res.Sigma = 0.5 * (res.Sigma + res.Sigma.transpose()).eval();
    return res;
}

SimTrace simulate(const LtiSystem& sys, const NoiseSampler& noise_v,
                  const NoiseSampler& noise_eta,
                  const std::vector<Eigen::VectorXd>& u, int steps,
                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SimTrace trace;
    trace.states.reserve(steps);
    trace.estimates.reserve(steps);
    trace.outputs.reserve(steps);
    trace.residuals.reserve(steps);
    trace.inputs.reserve(steps);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.n);
    Eigen::VectorXd xhat = Eigen::VectorXd::Zero(sys.n);
    const Eigen::VectorXd u_zero = Eigen::VectorXd::Zero(sys.m);
    for (int k = 0; k < steps; ++k) {
        const Eigen::VectorXd& uk =
            (static_cast<std::size_t>(k) < u.size()) ? u[k] : u_zero;
        if (uk.size() != sys.m)
            throw std::invalid_argument("simulate: input dimension mismatch");
        const Eigen::VectorXd eta = noise_eta(rng);
        if (eta.size() != sys.p)
            throw std::invalid_argument("simulate: measurement-noise dimension mismatch");
        const Eigen::VectorXd y = sys.C * x + eta;
        const Eigen::VectorXd r = y - sys.C * xhat;

        trace.states.push_back(x);
        trace.estimates.push_back(xhat);
        trace.outputs.push_back(y);
        trace.residuals.push_back(r);
        trace.inputs.push_back(uk);

        const Eigen::VectorXd v = noise_v(rng);
        if (v.size() != sys.n)
            throw std::invalid_argument("simulate: system-noise dimension mismatch");
        x = sys.F * x + sys.G * uk + v;
        xhat = sys.F * xhat + sys.G * uk + sys.L * r;
    }
    return trace;
}

} // namespace gmmtune
