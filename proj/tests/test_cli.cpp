#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

// GMMTUNE_CLI and GMMTUNE_DATA_DIR come from the build system.
#ifndef GMMTUNE_CLI
#error "GMMTUNE_CLI must point at the command-line binary"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(GMMTUNE_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("gmmtune_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string kTuneConfig = std::string(GMMTUNE_DATA_DIR) + "/example_tune.json";

} // namespace

TEST_CASE("tune writes a report and matches the library") {
    const fs::path out = fresh_dir("tune");
    REQUIRE(run("tune --config " + kTuneConfig + " --out " + out.string()) == 0);
    REQUIRE(fs::exists(out / "tuning_report.json"));
    REQUIRE(fs::exists(out / "cdf_curve.csv"));

    const json rep = json::parse(slurp(out / "tuning_report.json"));
    CHECK(rep["k_star"] == 10);
    CHECK(rep["target_rate"] == 0.478);
    CHECK(std::abs(rep["false_alarm"].get<double>() - 0.478) <= 1.1e-4);
    CHECK(rep["alpha"].get<double>() > 0.0);
    CHECK(rep["mode_count_reduced"].get<std::size_t>() > 1);
    // reports never carry timing fields
    CHECK(!rep.contains("elapsed_s"));
    CHECK(rep.dump().find("elapsed") == std::string::npos);

    // cdf curve is monotone nonincreasing in alpha
    std::ifstream csv(out / "cdf_curve.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "alpha,false_alarm");
    double prev_rate = 1.0;
    int rows = 0;
    while (std::getline(csv, line)) {
        const auto comma = line.find(',');
        const double rate = std::stod(line.substr(comma + 1));
        CHECK(rate <= prev_rate + 1e-12);
        prev_rate = rate;
        ++rows;
    }
    CHECK(rows == 100);
}

TEST_CASE("evaluate reports the rate at a fixed alpha") {
    const fs::path out = fresh_dir("evaluate");
    REQUIRE(run("evaluate --config " + kTuneConfig + " --out " + out.string()) == 0);
    const json rep = json::parse(slurp(out / "tuning_report.json"));
    CHECK(rep["alpha"] == 0.75);
    CHECK(std::abs(rep["false_alarm"].get<double>() - 0.5108) < 5e-4);
    CHECK(!rep.contains("empirical"));
}

TEST_CASE("repeated runs are byte-identical") {
    const fs::path out1 = fresh_dir("det1");
    const fs::path out2 = fresh_dir("det2");
    const std::string base = "tune --config " + kTuneConfig + " --out ";
    REQUIRE(run(base + out1.string()) == 0);
    REQUIRE(run(base + out2.string()) == 0);
    CHECK(slurp(out1 / "tuning_report.json") == slurp(out2 / "tuning_report.json"));
    CHECK(slurp(out1 / "cdf_curve.csv") == slurp(out2 / "cdf_curve.csv"));
}

TEST_CASE("simulate writes a full trace") {
    const fs::path out = fresh_dir("simulate");
    REQUIRE(run("simulate --config " + kTuneConfig + " --steps 50 --seed 3 --out " +
                out.string()) == 0);
    std::ifstream csv(out / "trace.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "step,x0,x1,xhat0,xhat1,y0,r0");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 50);
}

TEST_CASE("fit-noise round trip through CSV") {
    const fs::path out = fresh_dir("fit");
    // two well-separated 1-D clusters
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const fs::path csv_path = out / "samples.csv";
    {
        std::ofstream csv(csv_path);
        csv.precision(12);
        for (int i = 0; i < 4000; ++i)
            csv << (i % 2 == 0 ? -5.0 : 5.0) + gauss(rng) << "\n";
    }
    REQUIRE(run("fit-noise --samples " + csv_path.string() +
                " --modes 2 --seed 1 --out " + out.string()) == 0);
    const json g = json::parse(slurp(out / "gmm.json"));
    REQUIRE(g["modes"].size() == 2);
    std::vector<double> means;
    for (const auto& m : g["modes"]) means.push_back(m["mean"][0].get<double>());
    std::sort(means.begin(), means.end());
    CHECK(means[0] == doctest::Approx(-5.0).epsilon(0.05));
    CHECK(means[1] == doctest::Approx(5.0).epsilon(0.05));
    CHECK(fs::exists(out / "loglik_trace.csv"));
}

TEST_CASE("error handling") {
    const fs::path out = fresh_dir("errors");

    SUBCASE("missing config file") {
        CHECK(run("tune --config /nonexistent.json --out " + out.string()) == 2);
    }

    SUBCASE("malformed JSON") {
        const fs::path bad = out / "bad.json";
        std::ofstream(bad) << "{ not json";
        CHECK(run("tune --config " + bad.string() + " --out " + out.string()) == 2);
    }

    SUBCASE("missing required field") {
        const fs::path bad = out / "nosys.json";
        std::ofstream(bad) << R"({"noise_eta": {"gmm": {"dim": 1, "modes": []}}})";
        CHECK(run("tune --config " + bad.string() + " --out " + out.string()) == 2);
    }

    SUBCASE("tune without a target rate") {
        const fs::path bad = out / "notarget.json";
        std::ofstream(bad) << R"({
            "system": {"F": [[0.5]], "C": [[1.0]], "L": [[0.1]]},
            "noise_eta": {"gmm": {"dim": 1, "modes": [
                {"weight": 1.0, "mean": [0.0], "cov": [[1.0]]}]}}
        })";
        CHECK(run("tune --config " + bad.string() + " --out " + out.string()) == 2);
    }

    SUBCASE("unstable observer exits with a numerical error") {
        const fs::path bad = out / "unstable.json";
        std::ofstream(bad) << R"({
            "system": {"F": [[2.0]], "C": [[1.0]], "L": [[0.0]]},
            "noise_eta": {"gmm": {"dim": 1, "modes": [
                {"weight": 1.0, "mean": [0.0], "cov": [[1.0]]}]}},
            "target_rate": 0.1
        })";
        CHECK(run("tune --config " + bad.string() + " --out " + out.string()) == 3);
    }
}
