#include "gmmtune/mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gmmtune {

namespace {

// Streaming mean/covariance with exact pairwise merge.
struct MomentAccumulator {
    std::size_t count = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd scatter; // sum (x - mean)(x - mean)^T

    explicit MomentAccumulator(int d)
        : mean(Eigen::VectorXd::Zero(d)), scatter(Eigen::MatrixXd::Zero(d, d)) {}

    void add(const Eigen::VectorXd& x) {
        ++count;
        const Eigen::VectorXd delta = x - mean;
        mean += delta / double(count);
        scatter += delta * (x - mean).transpose();
    }

    void merge(const MomentAccumulator& other) {
        if (other.count == 0) return;
        if (count == 0) {
            *this = other;
            return;
        }
        const Eigen::VectorXd delta = other.mean - mean;
        const std::size_t total = count + other.count;
        scatter += other.scatter +
                   delta * delta.transpose() *
                       (double(count) * double(other.count) / double(total));
        mean += delta * (double(other.count) / double(total));
        count = total;
    }
};

std::uint64_t stream_seed(std::uint64_t seed, int batch) {
    // splitmix64 step keyed by the batch index
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (std::uint64_t(batch) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

EmpiricalSummary merge(const EmpiricalSummary& a, const EmpiricalSummary& b) {
    if (a.bin_edges != b.bin_edges)
        throw std::invalid_argument("merge: histogram bin edges differ");
    EmpiricalSummary out = a;
    const std::size_t total = a.sample_count + b.sample_count;
    const double wa = double(a.sample_count) / double(total);
    const double wb = double(b.sample_count) / double(total);
    out.sample_count = total;
    out.alarm_rate = wa * a.alarm_rate + wb * b.alarm_rate;
    // covariance merge with the between-batch mean correction
    const Eigen::VectorXd delta = b.mean - a.mean;
    out.mean = wa * a.mean + wb * b.mean;
    out.cov = wa * a.cov + wb * b.cov + wa * wb * delta * delta.transpose();
    for (std::size_t i = 0; i < out.bin_counts.size(); ++i)
        out.bin_counts[i] += b.bin_counts[i];
    return out;
}

EmpiricalSummary empirical_false_alarm(const LtiSystem& sys, const Gmm& noise_eta,
                                       const std::optional<Gmm>& noise_v,
                                       const ChiSquaredDetector& det,
                                       std::size_t samples, std::size_t burn_in,
                                       std::uint64_t seed, int batches) {
    if (batches < 1) throw std::invalid_argument("empirical_false_alarm: batches < 1");
    const Gmm v_model = noise_v ? *noise_v : Gmm::zero(sys.n);

    // histogram over the first residual component, centered on the detector
    const double center = det.mean(0);
    const double spread = 8.0 * std::sqrt(det.cov(0, 0));
    const int nbins = 200;
    std::vector<double> edges(nbins + 1);
    for (int i = 0; i <= nbins; ++i)
        edges[i] = center - spread + 2.0 * spread * i / nbins;

    EmpiricalSummary total;
    bool first = true;
    for (int b = 0; b < batches; ++b) {
        const std::size_t quota =
            samples / batches + (std::size_t(b) < samples % batches ? 1 : 0);
        std::mt19937_64 rng(stream_seed(seed, b));

        Eigen::VectorXd x = Eigen::VectorXd::Zero(sys.n);
        Eigen::VectorXd xhat = Eigen::VectorXd::Zero(sys.n);
        MomentAccumulator acc(sys.p);
        std::size_t alarms = 0;
        std::vector<std::size_t> counts(nbins, 0);
        for (std::size_t k = 0; k < burn_in + quota; ++k) {
            const Eigen::VectorXd eta = sample_one(noise_eta, rng);
            const Eigen::VectorXd r = sys.C * (x - xhat) + eta;
            if (k >= burn_in) {
                acc.add(r);
                if (distance_measure(det, r) > det.threshold) ++alarms;
                const int bin =
                    int(std::floor((r(0) - edges.front()) / (2.0 * spread) * nbins));
                if (bin >= 0 && bin < nbins) ++counts[bin];
            }
            const Eigen::VectorXd vk = sample_one(v_model, rng);
            // input-free recursion; the residual is input-invariant
            const Eigen::VectorXd x_next = sys.F * x + vk;
            xhat = sys.F * xhat + sys.L * r;
            x = x_next;
        }

        EmpiricalSummary batch;
        batch.sample_count = quota;
        batch.mean = acc.mean;
        batch.cov = quota > 0 ? (acc.scatter / double(quota)).eval()
                              : Eigen::MatrixXd::Zero(sys.p, sys.p);
        batch.alarm_rate = quota > 0 ? double(alarms) / double(quota) : 0.0;
        batch.bin_edges = edges;
        batch.bin_counts = counts;
        if (first) {
            total = batch;
            first = false;
        } else {
            total = merge(total, batch);
        }
    }
    return total;
}

double ks_1d(std::vector<double> samples, const Gmm& model) {
    if (model.dim != 1) throw std::invalid_argument("ks_1d: model must be 1-D");
    if (samples.empty()) throw std::invalid_argument("ks_1d: empty sample set");
    std::sort(samples.begin(), samples.end());
    const double n = double(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = cdf_1d(model, samples[i]);
        d = std::max(d, std::abs(cdf - double(i) / n));
        d = std::max(d, std::abs(double(i + 1) / n - cdf));
    }
    return d;
}

} // namespace gmmtune
