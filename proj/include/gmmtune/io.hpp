#pragma once

#include <string>
#include <vector>

// vendored single-header nlohmann/json
#include "json.hpp"

#include "gmmtune/mc_oracle.hpp"

namespace gmmtune::io {

/// Structural/config problems (bad JSON, missing fields, ragged CSV).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// {"F": [[...]], "G": [[...]], "C": [[...]], "L": [[...]]}; G optional.
LtiSystem parse_system(const nlohmann::json& j);

/// {"dim": d, "modes": [{"weight": w, "mean": [...], "cov": [[...]]}]}
Gmm parse_gmm(const nlohmann::json& j);
nlohmann::json gmm_to_json(const Gmm& g);

nlohmann::json residual_model_to_json(const ResidualModel& model);
nlohmann::json tuning_report_to_json(const TuningReport& report);
nlohmann::json empirical_summary_to_json(const EmpiricalSummary& s);

/// One vector per row, comma separated. Throws ConfigError on ragged rows.
std::vector<Eigen::VectorXd> read_csv_vectors(const std::string& path);

nlohmann::json load_json_file(const std::string& path);

} // namespace gmmtune::io
