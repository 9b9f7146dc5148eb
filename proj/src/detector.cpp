#include "gmmtune/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace gmmtune {

namespace {

constexpr double kPi = std::numbers::pi;

// --- regularized lower incomplete gamma -----------------------------------

double gamma_p_series(double s, double x) {
    double ap = s;
    double sum = 1.0 / s;
    double del = sum;
    for (int i = 0; i < 10000; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * 1e-16)
            return sum * std::exp(-x + s * std::log(x) - std::lgamma(s));
    }
    throw std::runtime_error("gamma_p: series did not converge");
}

double gamma_q_contfrac(double s, double x) {
    const double fpmin = std::numeric_limits<double>::min() / 1e-30;
    double b = x + 1.0 - s;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - s);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16)
            return std::exp(-x + s * std::log(x) - std::lgamma(s)) * h;
    }
    throw std::runtime_error("gamma_p: continued fraction did not converge");
}

// --- Gauss-Legendre nodes on [0, 1] ----------------------------------------

struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};

Quadrature gauss_legendre_01(int n) {
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    for (int i = 0; i < n / 2 + n % 2; ++i) {
        // Newton on P_n with Chebyshev-like initial guess, standard interval [-1,1]
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        q.nodes[i] = 0.5 * (1.0 - x);
        q.weights[i] = 0.5 * w;
        q.nodes[n - 1 - i] = 0.5 * (1.0 + x);
        q.weights[n - 1 - i] = 0.5 * w;
    }
    return q;
}

double log_gauss_norm(const Eigen::MatrixXd& chol_K, int p) {
    double log_det = 0.0;
    for (int i = 0; i < p; ++i) log_det += std::log(chol_K(i, i));
    return -log_det - 0.5 * p * std::log(2.0 * kPi);
}

// Density of N(mu_j, K_j) at point r, via the precomputed Cholesky of K_j.
double mode_density(const Eigen::MatrixXd& chol_K, const Eigen::VectorXd& diff,
                    double log_norm) {
    const Eigen::VectorXd z = chol_K.triangularView<Eigen::Lower>().solve(diff);
    return std::exp(log_norm - 0.5 * z.squaredNorm());
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Integrate the whitened mode density over the radius-sqrt(alpha) ball for
// p = 2 (polar) and p = 3 (spherical): Gauss-Legendre in radius and polar
// angle, uniform (periodic trapezoidal) grid in azimuth; order doubled until
// successive estimates agree.
MassResult ball_quadrature(const ChiSquaredDetector& det, const GaussianMode& mode,
                           const Eigen::MatrixXd& chol_K, double log_norm) {
    const int p = static_cast<int>(det.mean.size());
    const double R = std::sqrt(det.threshold);
    const double det_chol = det.chol.diagonal().prod();

    auto evaluate = [&](int order) {
        const Quadrature qr = gauss_legendre_01(order);
        double total = 0.0;
        if (p == 2) {
            const int na = 2 * order;
            for (int ir = 0; ir < order; ++ir) {
                const double r = R * qr.nodes[ir];
                const double wr = R * qr.weights[ir] * r;
                double ring = 0.0;
                for (int ia = 0; ia < na; ++ia) {
                    const double th = 2.0 * kPi * ia / na;
                    const Eigen::Vector2d rho(r * std::cos(th), r * std::sin(th));
                    const Eigen::VectorXd pt = det.chol * rho + det.mean;
                    ring += mode_density(chol_K, pt - mode.mean, log_norm);
                }
                total += wr * ring * (2.0 * kPi / na);
            }
        } else { // p == 3
            const Quadrature qp = gauss_legendre_01(order);
            const int na = 2 * order;
            for (int ir = 0; ir < order; ++ir) {
                const double r = R * qr.nodes[ir];
                const double wr = R * qr.weights[ir] * r * r;
                for (int ip = 0; ip < order; ++ip) {
                    const double phi = kPi * qp.nodes[ip];
                    const double wp = kPi * qp.weights[ip] * std::sin(phi);
                    double ring = 0.0;
                    for (int ia = 0; ia < na; ++ia) {
                        const double th = 2.0 * kPi * ia / na;
                        const Eigen::Vector3d rho(r * std::sin(phi) * std::cos(th),
                                                  r * std::sin(phi) * std::sin(th),
                                                  r * std::cos(phi));
                        const Eigen::VectorXd pt = det.chol * rho + det.mean;
                        ring += mode_density(chol_K, pt - mode.mean, log_norm);
                    }
                    total += wr * wp * ring * (2.0 * kPi / na);
                }
            }
        }
        return total * det_chol;
    };

    MassResult res;
    res.method = (p == 2) ? "polar-2d" : "spherical-3d";
    int order = 8;
    double prev = evaluate(order);
    for (int doubling = 0; doubling < 12; ++doubling) {
        order *= 2;
        const double cur = evaluate(order);
        res.error_estimate = std::abs(cur - prev);
        prev = cur;
        if (res.error_estimate < 1e-8) {
            res.mass = std::clamp(cur, 0.0, 1.0);
            return res;
        }
    }
    res.mass = std::clamp(prev, 0.0, 1.0);
    res.converged = false;
    return res;
}

// Shifted-Halton quasi Monte-Carlo over the bounding cube, fallback for p > 3.
MassResult qmc_mass(const ChiSquaredDetector& det, const GaussianMode& mode,
                    const Eigen::MatrixXd& chol_K, double log_norm) {
    const int p = static_cast<int>(det.mean.size());
    const double R = std::sqrt(det.threshold);
    const double det_chol = det.chol.diagonal().prod();
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
    if (p > 10) throw std::invalid_argument("mode_mass: dimension > 10 unsupported");

    auto radical_inverse = [](int base, std::uint64_t i) {
        double f = 1.0, r = 0.0;
        while (i > 0) {
            f /= base;
            r += f * (i % base);
            i /= base;
        }
        return r;
    };
    // deterministic Cranley-Patterson rotation
    std::mt19937_64 rng(0x5eedc0deULL);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd shift(p);
    for (int i = 0; i < p; ++i) shift(i) = unif(rng);

    const std::uint64_t n = 1ull << 20;
    double sum = 0.0;
    Eigen::VectorXd rho(p);
    for (std::uint64_t i = 1; i <= n; ++i) {
        for (int dim = 0; dim < p; ++dim) {
            double u = radical_inverse(primes[dim], i) + shift(dim);
            if (u >= 1.0) u -= 1.0;
            rho(dim) = (2.0 * u - 1.0) * R;
        }
        if (rho.squaredNorm() > R * R) continue;
        const Eigen::VectorXd pt = det.chol * rho + det.mean;
        sum += mode_density(chol_K, pt - mode.mean, log_norm);
    }
    const double cube_volume = std::pow(2.0 * R, p);
    MassResult res;
    res.method = "qmc";
    res.mass = std::clamp(sum / double(n) * cube_volume * det_chol, 0.0, 1.0);
    res.error_estimate = res.mass / std::sqrt(double(n)); // rough scale only
    return res;
}

Eigen::MatrixXd cholesky_spd(const Eigen::MatrixXd& M, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument(std::string(what) + ": matrix not positive definite");
    return llt.matrixL();
}

} // namespace

ChiSquaredDetector ChiSquaredDetector::create(const Eigen::VectorXd& mean,
                                              const Eigen::MatrixXd& cov,
                                              double alpha) {
    if (alpha <= 0.0)
        throw std::invalid_argument("ChiSquaredDetector: threshold must be positive");
    if (cov.rows() != mean.size() || cov.cols() != mean.size())
        throw std::invalid_argument("ChiSquaredDetector: dimension mismatch");
    ChiSquaredDetector det;
    det.mean = mean;
    det.cov = cov;
    det.chol = cholesky_spd(cov, "ChiSquaredDetector");
    det.threshold = alpha;
    return det;
}

double distance_measure(const ChiSquaredDetector& det, const Eigen::VectorXd& r) {
    const Eigen::VectorXd z =
        det.chol.triangularView<Eigen::Lower>().solve(r - det.mean);
    return z.squaredNorm();
}

double gamma_p_lower_regularized(double s, double x) {
    if (s <= 0.0) throw std::invalid_argument("gamma_p: s must be positive");
    if (x < 0.0) throw std::invalid_argument("gamma_p: x must be nonnegative");
    if (x == 0.0) return 0.0;
    if (x < s + 1.0) return gamma_p_series(s, x);
    return 1.0 - gamma_q_contfrac(s, x);
}

double gamma_p_lower_inverse(double s, double target) {
    if (target < 0.0 || target >= 1.0)
        throw std::invalid_argument("gamma_p_lower_inverse: target must be in [0, 1)");
    if (target == 0.0) return 0.0;

    double hi = s;
    while (gamma_p_lower_regularized(s, hi) < target) hi *= 2.0;
    double lo = 0.0;
    double x = 0.5 * hi;
    for (int iter = 0; iter < 200; ++iter) {
        const double f = gamma_p_lower_regularized(s, x) - target;
        if (f == 0.0) return x;
        if (f > 0.0)
            hi = x;
        else
            lo = x;
        // Newton step with bisection fallback when it leaves the bracket
        const double dens =
            std::exp(-x + (s - 1.0) * std::log(x) - std::lgamma(s));
        double next = (dens > 0.0) ? x - f / dens : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        // relative step tolerance so tiny quantiles keep full accuracy
        if (std::abs(next - x) <= 1e-12 * next) return next;
        x = next;
    }
    return x;
}

double gaussian_threshold(int p, double target_rate) {
    if (target_rate <= 0.0 || target_rate >= 1.0)
        throw std::invalid_argument("gaussian_threshold: rate must be in (0, 1)");
    return 2.0 * gamma_p_lower_inverse(0.5 * p, 1.0 - target_rate);
}

MassResult mode_mass(const ChiSquaredDetector& det, const GaussianMode& mode) {
    const int p = static_cast<int>(det.mean.size());
    if (mode.mean.size() != p)
        throw std::invalid_argument("mode_mass: dimension mismatch");

    if (p == 1) {
        // interval [mu - sigma*sqrt(alpha), mu + sigma*sqrt(alpha)]
        const double half = det.chol(0, 0) * std::sqrt(det.threshold);
        const double lo = det.mean(0) - half;
        const double hi = det.mean(0) + half;
        const double var = mode.cov(0, 0);
        MassResult res;
        res.method = "closed-form-1d";
        if (var <= 0.0) {
            res.mass = (mode.mean(0) >= lo && mode.mean(0) <= hi) ? 1.0 : 0.0;
        } else {
            const double sd = std::sqrt(var);
            res.mass = std_normal_cdf((hi - mode.mean(0)) / sd) -
                       std_normal_cdf((lo - mode.mean(0)) / sd);
        }
        return res;
    }

    Eigen::MatrixXd K = mode.cov;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) {
        K.diagonal().array() += std::max(1e-12 * K.trace() / p, 1e-300);
        llt.compute(K);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("mode_mass: mode covariance not PSD");
    }
    const Eigen::MatrixXd chol_K = llt.matrixL();
    const double log_norm = log_gauss_norm(chol_K, p);

    if (p == 2 || p == 3) return ball_quadrature(det, mode, chol_K, log_norm);
    return qmc_mass(det, mode, chol_K, log_norm);
}

TuningReport false_alarm_rate(const ResidualModel& model, double alpha) {
    const ChiSquaredDetector det =
        ChiSquaredDetector::create(model.overall_mean, model.overall_cov, alpha);
    TuningReport report;
    report.alpha = alpha;
    double mass_total = 0.0;
    for (std::size_t j = 0; j < model.mixture.modes.size(); ++j) {
        MassResult mr;
        try {
            mr = mode_mass(det, model.mixture.modes[j]);
        } catch (const std::exception& e) {
            throw std::runtime_error("false_alarm_rate: mode " + std::to_string(j) +
                                     ": " + e.what());
        }
        report.mode_masses.push_back(mr.mass);
        report.mode_weights.push_back(model.mixture.modes[j].weight);
        report.quadrature_error_estimate =
            std::max(report.quadrature_error_estimate, mr.error_estimate);
        report.method = mr.method;
        mass_total += model.mixture.modes[j].weight * mr.mass;
    }
    report.false_alarm = std::clamp(1.0 - mass_total, 0.0, 1.0);
    report.per_mode_alphas =
        per_mode_thresholds(report.mode_masses, static_cast<int>(det.mean.size()));
    return report;
}

std::pair<double, TuningReport> tune_threshold(const ResidualModel& model,
                                               double target_rate) {
    if (target_rate <= 0.0 || target_rate >= 1.0)
        throw std::invalid_argument("tune_threshold: target rate must be in (0, 1)");

    const int p = static_cast<int>(model.overall_mean.size());
    double hi = double(p);
    while (false_alarm_rate(model, hi).false_alarm > target_rate) hi *= 2.0;
    double lo = 0.0;
    double alpha = hi;
    TuningReport report = false_alarm_rate(model, hi);
    for (int iter = 0; iter < 200; ++iter) {
        alpha = 0.5 * (lo + hi);
        report = false_alarm_rate(model, alpha);
        if (std::abs(report.false_alarm - target_rate) <= 1e-4) break;
        if (report.false_alarm > target_rate)
            lo = alpha;
        else
            hi = alpha;
        if (hi - lo < 1e-10) break;
    }
    return {alpha, report};
}

std::vector<double> per_mode_thresholds(const std::vector<double>& mode_masses,
                                        int p) {
    std::vector<double> alphas;
    alphas.reserve(mode_masses.size());
    for (double mass : mode_masses) {
        if (mass >= 1.0)
            alphas.push_back(std::numeric_limits<double>::infinity());
        else
            alphas.push_back(2.0 * gamma_p_lower_inverse(0.5 * p, mass));
    }
    return alphas;
}

} // namespace gmmtune
