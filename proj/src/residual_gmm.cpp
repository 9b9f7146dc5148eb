#include "gmmtune/residual_gmm.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gmmtune {

namespace {

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a(i) < b(i)) return true;
        if (a(i) > b(i)) return false;
    }
    return false;
}

// Canonical mode order: weight descending, then lexicographic mean, then
// lexicographic covariance. Makes first-fit reduction order-independent.
void canonical_sort(Gmm& g) {
    std::sort(g.modes.begin(), g.modes.end(),
              [](const GaussianMode& a, const GaussianMode& b) {
                  if (a.weight != b.weight) return a.weight > b.weight;
                  if (lex_less(a.mean, b.mean)) return true;
                  if (lex_less(b.mean, a.mean)) return false;
                  Eigen::Map<const Eigen::VectorXd> ca(a.cov.data(), a.cov.size());
                  Eigen::Map<const Eigen::VectorXd> cb(b.cov.data(), b.cov.size());
                  return lex_less(ca, cb);
              });
}

const Gmm& system_noise_or_zero(const std::optional<Gmm>& noise_v, int n,
                                Gmm& storage) {
    if (noise_v) return *noise_v;
    storage = Gmm::zero(n);
    return storage;
}

} // namespace

Gmm residual_gmm_exact(const LtiSystem& sys, const Gmm& noise_eta,
                       const std::optional<Gmm>& noise_v, int k) {
    if (k < 1) throw std::domain_error("residual_gmm_exact: k must be >= 1");
    if (noise_eta.dim != sys.p)
        throw std::invalid_argument("residual_gmm_exact: eta dimension != p");
    Gmm zero_storage;
    const Gmm& v = system_noise_or_zero(noise_v, sys.n, zero_storage);
    if (v.dim != sys.n)
        throw std::invalid_argument("residual_gmm_exact: v dimension != n");

    const std::size_t m1 = noise_eta.modes.size();
    const std::size_t m2 = v.modes.size();
    const double count = std::pow(double(m1), k) * std::pow(double(m2), k - 1);
    if (count > 1e6)
        throw std::length_error(
            "residual_gmm_exact: mode count exceeds 1e6; use residual_gmm_iterative");

    const ResidualWeights w = residual_weights(sys, k);

    // Mixed-radix counter over 2k-1 digit positions: positions 0..k-1 select
    // an eta mode (radix m1), positions k..2k-2 a v mode (radix m2).
    const int digits = 2 * k - 1;
    std::vector<std::size_t> idx(digits, 0);
    std::vector<std::size_t> radix(digits);
    for (int i = 0; i < k; ++i) radix[i] = m1;
    for (int i = k; i < digits; ++i) radix[i] = m2;

    Gmm out;
    out.dim = sys.p;
    out.modes.reserve(static_cast<std::size_t>(count));
    while (true) {
        double weight = 1.0;
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(sys.p);
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(sys.p, sys.p);
        for (int kappa = 1; kappa <= k; ++kappa) {
            const auto& mode = noise_eta.modes[idx[kappa - 1]];
            weight *= mode.weight;
            mean += w.A[kappa - 1] * mode.mean;
            cov += w.A[kappa - 1] * mode.cov * w.A[kappa - 1].transpose();
        }
        for (int kappa = 1; kappa <= k - 1; ++kappa) {
            const auto& mode = v.modes[idx[k + kappa - 1]];
            weight *= mode.weight;
            mean += w.B[kappa - 1] * mode.mean;
            cov += w.B[kappa - 1] * mode.cov * w.B[kappa - 1].transpose();
        }
        out.modes.push_back({weight, mean, 0.5 * (cov + cov.transpose())});

        // Add with Wrap: increment the first digit, carry into later ones.
        int pos = 0;
        while (pos < digits) {
            if (++idx[pos] < radix[pos]) break;
            idx[pos] = 0;
            ++pos;
        }
        if (pos == digits) break;
    }
    return out;
}

Gmm residual_gmm_iterative(const LtiSystem& sys, const Gmm& noise_eta,
                           const std::optional<Gmm>& noise_v, int k,
                           const ReductionConfig& reduction) {
    if (k < 1) throw std::domain_error("residual_gmm_iterative: k must be >= 1");
    if (noise_eta.dim != sys.p)
        throw std::invalid_argument("residual_gmm_iterative: eta dimension != p");
    Gmm zero_storage;
    const Gmm& v = system_noise_or_zero(noise_v, sys.n, zero_storage);
    if (v.dim != sys.n)
        throw std::invalid_argument("residual_gmm_iterative: v dimension != n");

    const ResidualWeights w = residual_weights(sys, k);
    const Eigen::VectorXd zero_p = Eigen::VectorXd::Zero(sys.p);

    Gmm mix = noise_eta; // A_1 = I
    for (int kappa = 2; kappa <= k; ++kappa) {
        mix = independent_sum(mix, affine_map(noise_eta, w.A[kappa - 1], zero_p));
        mix = independent_sum(mix, affine_map(v, w.B[kappa - 2], zero_p));
        canonical_sort(mix);
        mix = reduce(mix, reduction);
    }
    canonical_sort(mix);
    return mix;
}

ResidualModel steady_state_residual_at(const LtiSystem& sys, const Gmm& noise_eta,
                                       const std::optional<Gmm>& noise_v, int k_star,
                                       const ReductionConfig& reduction) {
    require_stable(sys);
    ResidualModel model;
    model.mixture = residual_gmm_iterative(sys, noise_eta, noise_v, k_star, reduction);
    const Moments mom = moments(model.mixture);
    model.overall_mean = mom.mean;
    model.overall_cov = mom.cov;
    model.k_star = k_star;
    model.reduction = reduction;
    const double m2 = noise_v ? double(noise_v->modes.size()) : 1.0;
    model.mode_count_exact =
        std::pow(double(noise_eta.modes.size()), k_star) * std::pow(m2, k_star - 1);
    return model;
}

ResidualModel steady_state_residual(const LtiSystem& sys, const Gmm& noise_eta,
                                    const std::optional<Gmm>& noise_v,
                                    double tail_tol,
                                    const ReductionConfig& reduction) {
    const int k_star = settling_horizon(sys, tail_tol);
    return steady_state_residual_at(sys, noise_eta, noise_v, k_star, reduction);
}

Moments residual_overall_moments(const LtiSystem& sys, const Gmm& noise_eta,
                                 const std::optional<Gmm>& noise_v, int k) {
    Gmm zero_storage;
    const Gmm& v = system_noise_or_zero(noise_v, sys.n, zero_storage);
    const ResidualWeights w = residual_weights(sys, k);
    const Moments eta_m = moments(noise_eta);
    const Moments v_m = moments(v);
    Moments out;
    out.mean = Eigen::VectorXd::Zero(sys.p);
    out.cov = Eigen::MatrixXd::Zero(sys.p, sys.p);
    for (const auto& A : w.A) {
        out.mean += A * eta_m.mean;
        out.cov += A * eta_m.cov * A.transpose();
    }
    for (const auto& B : w.B) {
        out.mean += B * v_m.mean;
        out.cov += B * v_m.cov * B.transpose();
    }
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    return out;
}

EquivalentNoise equivalent_noise(const ResidualModel& model, const LtiSystem& sys,
                                 int k_star) {
    const ResidualWeights w = residual_weights(sys, k_star);
    const int p = sys.p;

    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(p, p);
    for (const auto& A : w.A) E += A;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(E, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smin = svd.singularValues()(p - 1);
    const double smax = svd.singularValues()(0);
    EquivalentNoise eq;
    eq.E = E;
    eq.condition_number = (smin > 0.0) ? smax / smin
                                       : std::numeric_limits<double>::infinity();
    if (smin <= 1e-12 * std::max(1.0, smax))
        throw std::runtime_error(
            "equivalent_noise: steady-state gain singular, condition number " +
            std::to_string(eq.condition_number));

    // Covariance transfer: a Gaussian measurement noise with covariance X
    // yields residual covariance S(X) = sum_kappa A_kappa X A_kappa^T. Invert
    // the vectorized map (vec(A X A^T) = (A kron A) vec(X), column-major) to
    // recover the noise covariance for each mode.
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p * p, p * p);
    for (const auto& A : w.A)
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                S.block(i * p, j * p, p, p) += A(i, j) * A;

    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(S);
    const Eigen::MatrixXd Einv = E.inverse();
    for (const auto& mode : model.mixture.modes) {
        eq.means.push_back(Einv * mode.mean);
        Eigen::Map<const Eigen::VectorXd> kvec(mode.cov.data(), p * p);
        const Eigen::VectorXd cvec = lu.solve(kvec);
        Eigen::MatrixXd C = Eigen::Map<const Eigen::MatrixXd>(cvec.data(), p, p);
        C = 0.5 * (C + C.transpose()).eval();
        eq.covs.push_back(C);
    }
    return eq;
}

} // namespace gmmtune
