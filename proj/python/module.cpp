// Python bindings for the main tuning operations.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gmmtune/mc_oracle.hpp"

namespace py = pybind11;
using namespace gmmtune;

namespace {

Gmm make_gmm(const std::vector<double>& weights,
             const std::vector<Eigen::VectorXd>& means,
             const std::vector<Eigen::MatrixXd>& covs) {
    if (weights.size() != means.size() || weights.size() != covs.size())
        throw std::invalid_argument("weights, means, covs must have equal length");
    Gmm g;
    g.dim = means.empty() ? 0 : static_cast<int>(means[0].size());
    for (std::size_t i = 0; i < weights.size(); ++i)
        g.modes.push_back({weights[i], means[i], covs[i]});
    g.validate();
    return g;
}

py::dict report_dict(const TuningReport& r) {
    py::dict d;
    d["alpha"] = r.alpha;
    d["false_alarm"] = r.false_alarm;
    d["mode_masses"] = r.mode_masses;
    d["mode_weights"] = r.mode_weights;
    d["per_mode_alphas"] = r.per_mode_alphas;
    d["quadrature_error_estimate"] = r.quadrature_error_estimate;
    d["method"] = r.method;
    return d;
}

} // namespace

PYBIND11_MODULE(_gmmtune, m) {
    m.doc() = "chi-squared detector tuning for Gaussian-mixture noises";

    py::class_<LtiSystem>(m, "LtiSystem")
        .def(py::init<Eigen::MatrixXd, Eigen::MatrixXd, Eigen::MatrixXd,
                      Eigen::MatrixXd>(),
             py::arg("F"), py::arg("G"), py::arg("C"), py::arg("L"))
        .def_readonly("n", &LtiSystem::n)
        .def_readonly("p", &LtiSystem::p)
        .def_readonly("m", &LtiSystem::m)
        .def("observer_matrix", &LtiSystem::observer_matrix);

    py::class_<GaussianMode>(m, "GaussianMode")
        .def_readonly("weight", &GaussianMode::weight)
        .def_readonly("mean", &GaussianMode::mean)
        .def_readonly("cov", &GaussianMode::cov);

    py::class_<Gmm>(m, "Gmm")
        .def(py::init(&make_gmm), py::arg("weights"), py::arg("means"),
             py::arg("covs"))
        .def_readonly("dim", &Gmm::dim)
        .def_readonly("modes", &Gmm::modes)
        .def("moments",
             [](const Gmm& g) {
                 const Moments mo = moments(g);
                 return py::make_tuple(mo.mean, mo.cov);
             })
        .def("pdf", [](const Gmm& g, const Eigen::VectorXd& x) { return pdf(g, x); })
        .def("cdf_1d", [](const Gmm& g, double x) { return cdf_1d(g, x); })
        .def("sample",
             [](const Gmm& g, std::size_t count, std::uint64_t seed) {
                 return sample(g, count, seed);
             },
             py::arg("count"), py::arg("seed"));

    py::class_<ReductionConfig>(m, "ReductionConfig")
        .def(py::init([](double d_mu, double d_K, bool moment_match) {
                 return ReductionConfig{d_mu, d_K, moment_match};
             }),
             py::arg("d_mu"), py::arg("d_K"), py::arg("moment_match") = true)
        .def_readwrite("d_mu", &ReductionConfig::d_mu)
        .def_readwrite("d_K", &ReductionConfig::d_K);

    py::class_<ResidualModel>(m, "ResidualModel")
        .def_readonly("mixture", &ResidualModel::mixture)
        .def_readonly("overall_mean", &ResidualModel::overall_mean)
        .def_readonly("overall_cov", &ResidualModel::overall_cov)
        .def_readonly("k_star", &ResidualModel::k_star)
        .def_readonly("mode_count_exact", &ResidualModel::mode_count_exact);

    m.def("validate_system", [](const LtiSystem& sys) {
        const StabilityReport rep = validate_system(sys);
        return py::make_tuple(rep.spectral_radius, rep.stable);
    });
    m.def("settling_horizon", &settling_horizon, py::arg("sys"),
          py::arg("tail_tol"));
    m.def("lyapunov_residual_cov",
          [](const LtiSystem& sys, const Eigen::MatrixXd& R1,
             const Eigen::MatrixXd& R2) {
              const LyapunovResult res = lyapunov_residual_cov(sys, R1, R2);
              return py::make_tuple(res.P, res.Sigma);
          });
    m.def("reduce", &reduce, py::arg("gmm"), py::arg("config"));
    m.def("em_fit",
          [](const std::vector<Eigen::VectorXd>& samples, int mode_count,
             std::uint64_t seed) {
              const EmResult res = em_fit(samples, mode_count, seed);
              return py::make_tuple(res.model, res.loglik_trace);
          },
          py::arg("samples"), py::arg("mode_count"), py::arg("seed"));
    m.def("steady_state_residual", &steady_state_residual, py::arg("sys"),
          py::arg("noise_eta"), py::arg("noise_v"), py::arg("tail_tol"),
          py::arg("reduction"));
    m.def("steady_state_residual_at", &steady_state_residual_at, py::arg("sys"),
          py::arg("noise_eta"), py::arg("noise_v"), py::arg("k_star"),
          py::arg("reduction"));
    m.def("gaussian_threshold", &gaussian_threshold, py::arg("p"),
          py::arg("target_rate"));
    m.def("gamma_p_lower_regularized", &gamma_p_lower_regularized, py::arg("s"),
          py::arg("x"));
    m.def("gamma_p_lower_inverse", &gamma_p_lower_inverse, py::arg("s"),
          py::arg("target"));
    m.def("false_alarm_rate",
          [](const ResidualModel& model, double alpha) {
              return report_dict(false_alarm_rate(model, alpha));
          },
          py::arg("model"), py::arg("alpha"));
    m.def("tune_threshold",
          [](const ResidualModel& model, double target_rate) {
              const auto [alpha, report] = tune_threshold(model, target_rate);
              return py::make_tuple(alpha, report_dict(report));
          },
          py::arg("model"), py::arg("target_rate"));
    m.def("empirical_false_alarm",
          [](const LtiSystem& sys, const Gmm& eta, const std::optional<Gmm>& v,
             const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, double alpha,
             std::size_t samples, std::size_t burn_in, std::uint64_t seed,
             int batches) {
              const ChiSquaredDetector det =
                  ChiSquaredDetector::create(mean, cov, alpha);
              const EmpiricalSummary s = empirical_false_alarm(
                  sys, eta, v, det, samples, burn_in, seed, batches);
              py::dict d;
              d["sample_count"] = s.sample_count;
              d["alarm_rate"] = s.alarm_rate;
              d["mean"] = s.mean;
              d["cov"] = s.cov;
              return d;
          },
          py::arg("sys"), py::arg("noise_eta"), py::arg("noise_v"),
          py::arg("mean"), py::arg("cov"), py::arg("alpha"), py::arg("samples"),
          py::arg("burn_in"), py::arg("seed"), py::arg("batches") = 8);
    m.def("ks_1d", &ks_1d, py::arg("samples"), py::arg("model"));
}
