// Command-line front end: tune / evaluate / fit-noise / simulate.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "gmmtune/io.hpp"

namespace fs = std::filesystem;
using namespace gmmtune;
using nlohmann::json;

namespace {

struct Job {
    LtiSystem sys;
    Gmm noise_eta;
    std::optional<Gmm> noise_v;
    double tail_tol = 1e-6;
    std::optional<int> k_star;
    std::optional<ReductionConfig> reduction; // nullopt -> auto
    std::optional<double> alpha;
    std::optional<double> target_rate;
    std::size_t mc_samples = 1000000;
    std::size_t mc_burn_in = 0; // 0 -> 5 * k_star
    std::uint64_t mc_seed = 0;
    int mc_batches = 8;
};

json resolve_ref(const json& node, const fs::path& base) {
    if (node.is_string()) {
        fs::path p = node.get<std::string>();
        if (p.is_relative()) p = base / p;
        return io::load_json_file(p.string());
    }
    return node;
}

Gmm load_noise(const json& node, const fs::path& base, std::uint64_t seed,
               const char* field) {
    const bool has_gmm = node.contains("gmm");
    const bool has_samples = node.contains("samples");
    if (has_gmm == has_samples)
        throw io::ConfigError(std::string(field) +
                              ": exactly one of 'gmm' or 'samples' required");
    if (has_gmm) return io::parse_gmm(resolve_ref(node["gmm"], base));
    if (!node.contains("mode_count"))
        throw io::ConfigError(std::string(field) +
                              ": 'samples' requires 'mode_count'");
    fs::path p = node["samples"].get<std::string>();
    if (p.is_relative()) p = base / p;
    const auto samples = io::read_csv_vectors(p.string());
    return em_fit(samples, node["mode_count"].get<int>(), seed).model;
}

Job load_job(const std::string& config_path, std::uint64_t seed_override,
             bool has_seed_override, double tail_tol_override,
             bool has_tail_tol_override) {
    const json cfg = io::load_json_file(config_path);
    const fs::path base = fs::path(config_path).parent_path();
    if (!cfg.contains("system")) throw io::ConfigError("config: missing 'system'");
    if (!cfg.contains("noise_eta"))
        throw io::ConfigError("config: missing 'noise_eta'");

    std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
    if (has_seed_override) seed = seed_override;

    Job job{io::parse_system(resolve_ref(cfg["system"], base)),
            load_noise(cfg["noise_eta"], base, seed, "noise_eta")};
    if (cfg.contains("noise_v"))
        job.noise_v = load_noise(cfg["noise_v"], base, seed ^ 1, "noise_v");

    job.tail_tol = cfg.value("tail_tol", 1e-6);
    if (has_tail_tol_override) job.tail_tol = tail_tol_override;
    if (job.tail_tol <= 0) throw io::ConfigError("config: tail_tol must be positive");
    if (cfg.contains("k_star")) job.k_star = cfg["k_star"].get<int>();
    if (cfg.contains("reduction") && cfg["reduction"] != "auto") {
        const json& r = cfg["reduction"];
        if (!r.contains("d_mu") || !r.contains("d_K"))
            throw io::ConfigError("config: reduction needs 'd_mu' and 'd_K' (or \"auto\")");
        ReductionConfig red;
        red.d_mu = r["d_mu"].get<double>();
        red.d_K = r["d_K"].get<double>();
        red.moment_match = r.value("moment_match", true);
        if (red.d_mu < 0 || red.d_K < 0)
            throw io::ConfigError("config: reduction thresholds must be nonnegative");
        job.reduction = red;
    }
    if (cfg.contains("alpha")) job.alpha = cfg["alpha"].get<double>();
    if (cfg.contains("target_rate")) {
        job.target_rate = cfg["target_rate"].get<double>();
        if (*job.target_rate <= 0.0 || *job.target_rate >= 1.0)
            throw io::ConfigError("config: target_rate must be in (0, 1)");
    }
    if (cfg.contains("mc")) {
        const json& mc = cfg["mc"];
        job.mc_samples = mc.value("N", std::size_t{1000000});
        job.mc_burn_in = mc.value("burn_in", std::size_t{0});
        job.mc_seed = mc.value("seed", std::uint64_t{0});
        job.mc_batches = mc.value("batches", 8);
    }
    if (has_seed_override) job.mc_seed = seed_override;
    return job;
}

ResidualModel build_model(const Job& job) {
    require_stable(job.sys);
    const int k = job.k_star ? *job.k_star
                             : settling_horizon(job.sys, job.tail_tol);
    ReductionConfig red;
    if (job.reduction) {
        red = *job.reduction;
    } else {
        // auto thresholds from the propagated residual spread
        const Moments mom =
            residual_overall_moments(job.sys, job.noise_eta, job.noise_v, k);
        red.d_mu = 0.01 * mom.cov.diagonal().cwiseSqrt().norm();
        red.d_K = 0.01 * mom.cov.norm();
    }
    return steady_state_residual_at(job.sys, job.noise_eta, job.noise_v, k, red);
}

void write_cdf_curve(const fs::path& path, const ResidualModel& model) {
    // alpha grid out to the point where the alarm rate is negligible
    double alpha_max = double(model.overall_mean.size());
    while (false_alarm_rate(model, alpha_max).false_alarm > 1e-4 &&
           alpha_max < 1e9)
        alpha_max *= 2.0;
    std::ofstream out(path);
    out << "alpha,false_alarm\n";
    out.precision(12);
    const int points = 100;
    for (int i = 1; i <= points; ++i) {
        const double a = alpha_max * i / points;
        out << a << "," << false_alarm_rate(model, a).false_alarm << "\n";
    }
}

json model_report(const ResidualModel& model, const TuningReport& report) {
    json j = io::tuning_report_to_json(report);
    j["k_star"] = model.k_star;
    j["mode_count_exact"] = model.mode_count_exact;
    j["mode_count_reduced"] = model.mixture.modes.size();
    j["reduction"] = {{"d_mu", model.reduction.d_mu},
                      {"d_K", model.reduction.d_K}};
    json mean = json::array();
    for (Eigen::Index i = 0; i < model.overall_mean.size(); ++i)
        mean.push_back(model.overall_mean(i));
    j["overall_mean"] = mean;
    json cov = json::array();
    for (Eigen::Index i = 0; i < model.overall_cov.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < model.overall_cov.cols(); ++c)
            row.push_back(model.overall_cov(i, c));
        cov.push_back(row);
    }
    j["overall_cov"] = cov;
    return j;
}

void write_report(const fs::path& out_dir, const json& report) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "tuning_report.json");
    out << report.dump(2) << "\n";
}

json run_mc(const Job& job, const ResidualModel& model, double alpha) {
    const ChiSquaredDetector det =
        ChiSquaredDetector::create(model.overall_mean, model.overall_cov, alpha);
    const std::size_t burn_in =
        job.mc_burn_in > 0 ? job.mc_burn_in : std::size_t(5) * model.k_star;
    const EmpiricalSummary summary =
        empirical_false_alarm(job.sys, job.noise_eta, job.noise_v, det,
                              job.mc_samples, burn_in, job.mc_seed, job.mc_batches);
    json j = io::empirical_summary_to_json(summary);
    j["burn_in"] = burn_in;
    j["analytic_minus_empirical"] = 0.0; // filled by caller
    return j;
}

int cmd_tune(const std::string& config, const fs::path& out_dir, const Job& job) {
    if (!job.target_rate)
        throw io::ConfigError("config: 'target_rate' required for tune");
    const ResidualModel model = build_model(job);
    const auto [alpha, report] = tune_threshold(model, *job.target_rate);
    json j = model_report(model, report);
    j["target_rate"] = *job.target_rate;
    write_report(out_dir, j);
    write_cdf_curve(out_dir / "cdf_curve.csv", model);
    std::cout << "alpha = " << alpha << ", false_alarm = " << report.false_alarm
              << " (target " << *job.target_rate << ")\n";
    return 0;
}

int cmd_evaluate(const std::string& config, const fs::path& out_dir, const Job& job,
                 bool with_mc) {
    if (!job.alpha) throw io::ConfigError("config: 'alpha' required for evaluate");
    if (*job.alpha <= 0.0) throw io::ConfigError("config: alpha must be positive");
    const ResidualModel model = build_model(job);
    const TuningReport report = false_alarm_rate(model, *job.alpha);
    json j = model_report(model, report);
    if (with_mc) {
        json mc = run_mc(job, model, *job.alpha);
        mc["analytic_minus_empirical"] =
            report.false_alarm - mc["alarm_rate"].get<double>();
        j["empirical"] = mc;
    }
    write_report(out_dir, j);
    write_cdf_curve(out_dir / "cdf_curve.csv", model);
    std::cout << "false_alarm = " << report.false_alarm << " at alpha = "
              << *job.alpha << "\n";
    return 0;
}

int cmd_fit_noise(const std::string& samples_path, int mode_count,
                  std::uint64_t seed, const fs::path& out_dir) {
    const auto samples = io::read_csv_vectors(samples_path);
    const EmResult res = em_fit(samples, mode_count, seed);
    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "gmm.json");
        out << io::gmm_to_json(res.model).dump(2) << "\n";
    }
    {
        std::ofstream out(out_dir / "loglik_trace.csv");
        out << "iteration,loglik\n";
        out.precision(12);
        for (std::size_t i = 0; i < res.loglik_trace.size(); ++i)
            out << i << "," << res.loglik_trace[i] << "\n";
    }
    if (res.degenerate)
        std::cerr << "warning: degenerate component persisted after reseed\n";
    std::cout << "fitted " << res.model.modes.size() << " modes over "
              << samples.size() << " samples\n";
    return 0;
}

int cmd_simulate(const Job& job, int steps, std::uint64_t seed,
                 const fs::path& out_dir) {
    Gmm v_model = job.noise_v ? *job.noise_v : Gmm::zero(job.sys.n);
    const Gmm eta = job.noise_eta;
    const SimTrace trace = simulate(
        job.sys, [&](std::mt19937_64& rng) { return sample_one(v_model, rng); },
        [&](std::mt19937_64& rng) { return sample_one(eta, rng); }, {}, steps,
        seed);
    fs::create_directories(out_dir);
    std::ofstream out(out_dir / "trace.csv");
    out.precision(12);
    out << "step";
    for (int i = 0; i < job.sys.n; ++i) out << ",x" << i;
    for (int i = 0; i < job.sys.n; ++i) out << ",xhat" << i;
    for (int i = 0; i < job.sys.p; ++i) out << ",y" << i;
    for (int i = 0; i < job.sys.p; ++i) out << ",r" << i;
    out << "\n";
    for (int k = 0; k < steps; ++k) {
        out << k;
        for (int i = 0; i < job.sys.n; ++i) out << "," << trace.states[k](i);
        for (int i = 0; i < job.sys.n; ++i) out << "," << trace.estimates[k](i);
        for (int i = 0; i < job.sys.p; ++i) out << "," << trace.outputs[k](i);
        for (int i = 0; i < job.sys.p; ++i) out << "," << trace.residuals[k](i);
        out << "\n";
    }
    std::cout << "wrote " << steps << " steps\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"chi-squared detector tuning for Gaussian-mixture noises"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    double tail_tol = 1e-6;
    bool tail_tol_set = false;
    bool with_mc = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", config_path, "job config JSON")->required();
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "seed override")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--tail-tol", tail_tol, "settling-horizon tolerance")
            ->each([&](const std::string&) { tail_tol_set = true; });
    };

    auto* tune = app.add_subcommand("tune", "find alpha for a target false-alarm rate");
    add_common(tune, true);
    auto* evaluate = app.add_subcommand("evaluate", "false-alarm rate for a given alpha");
    add_common(evaluate, true);
    evaluate->add_flag("--mc", with_mc, "append a Monte-Carlo summary");

    std::string samples_path;
    int mode_count = 1;
    auto* fit = app.add_subcommand("fit-noise", "EM-fit a GMM to sample CSV");
    fit->add_option("--samples", samples_path, "CSV of samples, one vector per row")
        ->required();
    fit->add_option("--modes", mode_count, "number of Gaussian modes")->required();
    fit->add_option("--out", out_dir, "output directory");
    fit->add_option("--seed", seed, "EM seed");

    int steps = 1000;
    auto* sim = app.add_subcommand("simulate", "simulate a noisy trajectory");
    add_common(sim, true);
    sim->add_option("--steps", steps, "trajectory length");

    CLI11_PARSE(app, argc, argv);

    const auto t0 = std::chrono::steady_clock::now();
    int rc = 0;
    try {
        if (fit->parsed()) {
            rc = cmd_fit_noise(samples_path, mode_count, seed, out_dir);
        } else {
            const Job job =
                load_job(config_path, seed, seed_set, tail_tol, tail_tol_set);
            if (tune->parsed()) rc = cmd_tune(config_path, out_dir, job);
            if (evaluate->parsed()) rc = cmd_evaluate(config_path, out_dir, job, with_mc);
            if (sim->parsed()) rc = cmd_simulate(job, steps, seed, out_dir);
        }
    } catch (const io::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    }
    const auto t1 = std::chrono::steady_clock::now();
    // timings go to a sidecar, never into the report files
    std::ofstream log(fs::path(out_dir) / "run.log", std::ios::app);
    log << "elapsed_s=" << std::chrono::duration<double>(t1 - t0).count() << "\n";
    return rc;
}
