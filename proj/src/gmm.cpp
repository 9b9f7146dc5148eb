#include "gmmtune/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gmmtune {

namespace {

constexpr double kWeightTol = 1e-10;
constexpr double kSymTol = 1e-12;

void check_dims(const Gmm& g) {
    for (const auto& m : g.modes) {
        if (m.mean.size() != g.dim || m.cov.rows() != g.dim || m.cov.cols() != g.dim)
            throw std::invalid_argument("gmm: mode dimension mismatch");
    }
}

// Cholesky with jitter fallback for singular covariances.
Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& K) {
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const int d = static_cast<int>(K.rows());
    double jitter = 1e-12 * K.trace() / d;
    if (jitter <= 0.0) jitter = 1e-300;
    Eigen::MatrixXd Kj = K;
    for (int attempt = 0; attempt < 60; ++attempt) {
        Kj.diagonal().array() += jitter;
        llt.compute(Kj);
        if (llt.info() == Eigen::Success) return llt.matrixL();
        jitter *= 10.0;
    }
    throw std::runtime_error("gmm: covariance not positive semidefinite");
}

double log_mode_density(const GaussianMode& m, const Eigen::VectorXd& x) {
    const int d = static_cast<int>(x.size());
    const Eigen::MatrixXd L = robust_cholesky(m.cov);
    const Eigen::VectorXd z =
        L.triangularView<Eigen::Lower>().solve(x - m.mean);
    double log_det = 0.0;
    for (int i = 0; i < d; ++i) log_det += std::log(L(i, i));
    return -0.5 * z.squaredNorm() - log_det -
           0.5 * d * std::log(2.0 * std::numbers::pi);
}

} // namespace

Gmm Gmm::single(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    Gmm g;
    g.dim = static_cast<int>(mean.size());
    g.modes.push_back({1.0, mean, cov});
    return g;
}

Gmm Gmm::zero(int d) {
    return single(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d));
}

void Gmm::validate() const {
    if (dim <= 0) throw std::invalid_argument("gmm: dim must be positive");
    if (modes.empty()) throw std::invalid_argument("gmm: no modes");
    check_dims(*this);
    double total = 0.0;
    for (const auto& m : modes) {
        if (!(m.weight > 0.0) || m.weight > 1.0 + kWeightTol)
            throw std::invalid_argument("gmm: weight outside (0, 1]");
        total += m.weight;
        if ((m.cov - m.cov.transpose()).cwiseAbs().maxCoeff() >
            kSymTol * std::max(1.0, m.cov.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("gmm: covariance not symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.cov);
        if (es.eigenvalues().minCoeff() <
            -1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
            throw std::invalid_argument("gmm: covariance not PSD");
    }
    if (std::abs(total - 1.0) > kWeightTol)
        throw std::invalid_argument("gmm: weights do not sum to 1");
}

Gmm affine_map(const Gmm& g, const Eigen::MatrixXd& Q, const Eigen::VectorXd& shift) {
    if (Q.cols() != g.dim || shift.size() != Q.rows())
        throw std::invalid_argument("affine_map: dimension mismatch");
    Gmm out;
    out.dim = static_cast<int>(Q.rows());
    out.modes.reserve(g.modes.size());
    for (const auto& m : g.modes)
        out.modes.push_back({m.weight, Q * m.mean + shift, Q * m.cov * Q.transpose()});
    return out;
}

Gmm independent_sum(const Gmm& a, const Gmm& b) {
    if (a.dim != b.dim)
        throw std::invalid_argument("independent_sum: dimension mismatch");
    Gmm out;
    out.dim = a.dim;
    out.modes.reserve(a.modes.size() * b.modes.size());
    for (const auto& ma : a.modes)
        for (const auto& mb : b.modes)
            out.modes.push_back(
                {ma.weight * mb.weight, ma.mean + mb.mean, ma.cov + mb.cov});
    return out;
}

Moments moments(const Gmm& g) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(g.dim);
    for (const auto& m : g.modes) mean += m.weight * m.mean;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(g.dim, g.dim);
    for (const auto& m : g.modes) {
        const Eigen::VectorXd gamma = mean - m.mean;
        cov += m.weight * (m.cov + gamma * gamma.transpose());
    }
    return {mean, cov};
}

double pdf(const Gmm& g, const Eigen::VectorXd& x) {
    if (x.size() != g.dim) throw std::invalid_argument("pdf: dimension mismatch");
    double total = 0.0;
    for (const auto& m : g.modes)
        total += m.weight * std::exp(log_mode_density(m, x));
    return total;
}

double cdf_1d(const Gmm& g, double x) {
    if (g.dim != 1) throw std::invalid_argument("cdf_1d: requires dim == 1");
    double total = 0.0;
    for (const auto& m : g.modes) {
        const double mu = m.mean(0);
        const double var = m.cov(0, 0);
        if (var <= 0.0) {
            total += m.weight * (x >= mu ? 1.0 : 0.0);
        } else {
            total += m.weight * 0.5 *
                     (1.0 + std::erf((x - mu) / std::sqrt(2.0 * var)));
        }
    }
    return total;
}

Eigen::VectorXd sample_one(const Gmm& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double u = unif(rng);
    double acc = 0.0;
    std::size_t pick = g.modes.size() - 1;
    for (std::size_t j = 0; j < g.modes.size(); ++j) {
        acc += g.modes[j].weight;
        if (u <= acc) {
            pick = j;
            break;
        }
    }
    const auto& m = g.modes[pick];
    if (m.cov.isZero(0.0)) return m.mean;
    const Eigen::MatrixXd L = robust_cholesky(m.cov);
    Eigen::VectorXd z(g.dim);
    for (int i = 0; i < g.dim; ++i) z(i) = gauss(rng);
    return m.mean + L * z;
}

std::vector<Eigen::VectorXd> sample(const Gmm& g, std::size_t count,
                                    std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(sample_one(g, rng));
    return out;
}

Gmm reduce(const Gmm& g, const ReductionConfig& cfg) {
    if (cfg.d_mu < 0.0 || cfg.d_K < 0.0)
        throw std::invalid_argument("reduce: thresholds must be nonnegative");
    if (cfg.d_mu == 0.0 && cfg.d_K == 0.0) return g;

    struct Cluster {
        Eigen::VectorXd rep_mean;
        Eigen::MatrixXd rep_cov;
        double weight = 0.0;
        Eigen::VectorXd mean_acc;  // sum w_i mu_i
        Eigen::MatrixXd scatter;   // sum w_i (K_i + mu_i mu_i^T)
    };
    std::vector<Cluster> clusters;
    for (const auto& m : g.modes) {
        Cluster* home = nullptr;
        for (auto& c : clusters) {
            if ((m.mean - c.rep_mean).norm() <= cfg.d_mu &&
                (m.cov - c.rep_cov).norm() <= cfg.d_K) {
                home = &c;
                break;
            }
        }
        if (!home) {
            clusters.push_back({m.mean, m.cov, 0.0, Eigen::VectorXd::Zero(g.dim),
                                Eigen::MatrixXd::Zero(g.dim, g.dim)});
            home = &clusters.back();
        }
        home->weight += m.weight;
        home->mean_acc += m.weight * m.mean;
        home->scatter += m.weight * (m.cov + m.mean * m.mean.transpose());
    }

    Gmm out;
    out.dim = g.dim;
    out.modes.reserve(clusters.size());
    for (const auto& c : clusters) {
        if (cfg.moment_match) {
            const Eigen::VectorXd mu = c.mean_acc / c.weight;
            Eigen::MatrixXd K = c.scatter / c.weight - mu * mu.transpose();
            K = 0.5 * (K + K.transpose());
            out.modes.push_back({c.weight, mu, K});
        } else {
            out.modes.push_back({c.weight, c.rep_mean, c.rep_cov});
        }
    }
    return out;
}

ReductionConfig auto_reduction(const Gmm& g) {
    const Moments m = moments(g);
    ReductionConfig cfg;
    cfg.d_mu = 0.01 * m.cov.diagonal().cwiseSqrt().norm();
    cfg.d_K = 0.01 * m.cov.norm();
    return cfg;
}

namespace {

// k-means++ seeding followed by Lloyd iterations; returns responsibilities
// as hard assignments.
std::vector<Eigen::VectorXd> kmeans_pp(const std::vector<Eigen::VectorXd>& xs,
                                       int k, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
    std::vector<Eigen::VectorXd> centers;
    centers.push_back(xs[pick(rng)]);
    std::vector<double> d2(xs.size());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double best = std::numeric_limits<double>::max();
            for (const auto& c : centers)
                best = std::min(best, (xs[i] - c).squaredNorm());
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            centers.push_back(xs[pick(rng)]);
            continue;
        }
        double target = unif(rng) * total;
        std::size_t chosen = xs.size() - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            acc += d2[i];
            if (acc >= target) {
                chosen = i;
                break;
            }
        }
        centers.push_back(xs[chosen]);
    }
    // a few Lloyd sweeps to settle the seeds
    const int d = static_cast<int>(xs[0].size());
    for (int sweep = 0; sweep < 10; ++sweep) {
        std::vector<Eigen::VectorXd> sums(k, Eigen::VectorXd::Zero(d));
        std::vector<std::size_t> counts(k, 0);
        for (const auto& x : xs) {
            int best = 0;
            double bd = std::numeric_limits<double>::max();
            for (int j = 0; j < k; ++j) {
                const double dist = (x - centers[j]).squaredNorm();
                if (dist < bd) {
                    bd = dist;
                    best = j;
                }
            }
            sums[best] += x;
            counts[best]++;
        }
        for (int j = 0; j < k; ++j)
            if (counts[j] > 0) centers[j] = sums[j] / double(counts[j]);
    }
    return centers;
}

struct EmState {
    Gmm model;
    std::vector<double> trace;
    bool degenerate = false;
};

EmState run_em(const std::vector<Eigen::VectorXd>& xs, int k,
               std::mt19937_64& rng) {
    const int d = static_cast<int>(xs[0].size());
    const std::size_t n = xs.size();

    EmState st;
    st.model.dim = d;
    auto centers = kmeans_pp(xs, k, rng);

    // initial covariance: pooled sample covariance
    Eigen::VectorXd xbar = Eigen::VectorXd::Zero(d);
    for (const auto& x : xs) xbar += x;
    xbar /= double(n);
    Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(d, d);
    for (const auto& x : xs) pooled += (x - xbar) * (x - xbar).transpose();
    pooled /= double(n);
    if (pooled.isZero(0.0)) pooled = Eigen::MatrixXd::Identity(d, d) * 1e-12;

    for (int j = 0; j < k; ++j)
        st.model.modes.push_back({1.0 / k, centers[j], pooled});

    Eigen::MatrixXd resp(n, k);
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 500; ++iter) {
        // E step in log space
        double ll = 0.0;
        std::vector<Eigen::MatrixXd> chols(k);
        std::vector<double> log_dets(k);
        for (int j = 0; j < k; ++j) {
            chols[j] = robust_cholesky(st.model.modes[j].cov);
            log_dets[j] = 0.0;
            for (int i = 0; i < d; ++i) log_dets[j] += std::log(chols[j](i, i));
        }
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::VectorXd logp(k);
            for (int j = 0; j < k; ++j) {
                const Eigen::VectorXd z =
                    chols[j].triangularView<Eigen::Lower>().solve(
                        xs[i] - st.model.modes[j].mean);
                logp(j) = std::log(st.model.modes[j].weight) -
                          0.5 * z.squaredNorm() - log_dets[j] -
                          0.5 * d * std::log(2.0 * std::numbers::pi);
            }
            const double mx = logp.maxCoeff();
            const double lse = mx + std::log((logp.array() - mx).exp().sum());
            ll += lse;
            resp.row(i) = (logp.array() - lse).exp();
        }
        st.trace.push_back(ll);
        if (iter > 0 && ll - prev_ll < 1e-8 * double(n)) break;
        prev_ll = ll;

        // M step
        for (int j = 0; j < k; ++j) {
            const double nj = resp.col(j).sum();
            if (nj < 1e-8 * double(n)) {
                st.degenerate = true;
                return st;
            }
            Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
            for (std::size_t i = 0; i < n; ++i) mu += resp(i, j) * xs[i];
            mu /= nj;
            Eigen::MatrixXd K = Eigen::MatrixXd::Zero(d, d);
            for (std::size_t i = 0; i < n; ++i) {
                const Eigen::VectorXd c = xs[i] - mu;
                K += resp(i, j) * c * c.transpose();
            }
            K /= nj;
            K = 0.5 * (K + K.transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
            if (es.eigenvalues().minCoeff() <= 0.0) {
                st.degenerate = true;
                return st;
            }
            st.model.modes[j] = {nj / double(n), mu, K};
        }
    }
    return st;
}

} // namespace

EmResult em_fit(const std::vector<Eigen::VectorXd>& samples, int mode_count,
                std::uint64_t seed) {
    if (mode_count < 1) throw std::invalid_argument("em_fit: mode_count < 1");
    if (samples.empty()) throw std::invalid_argument("em_fit: no samples");
    const int d = static_cast<int>(samples[0].size());
    if (samples.size() < static_cast<std::size_t>(10 * mode_count * d))
        throw std::invalid_argument("em_fit: need at least 10 * mode_count * dim samples");
    for (const auto& x : samples)
        if (x.size() != d) throw std::invalid_argument("em_fit: ragged samples");

    std::mt19937_64 rng(seed);
    EmState st = run_em(samples, mode_count, rng);
    EmResult res;
    if (st.degenerate) {
        std::mt19937_64 rng2(seed ^ 0x9e3779b97f4a7c15ull);
        st = run_em(samples, mode_count, rng2);
        res.reseeded = true;
    }
    res.model = st.model;
    res.loglik_trace = st.trace;
    res.degenerate = st.degenerate;
    return res;
}

} // namespace gmmtune
