#include "gmmtune/io.hpp"

#include <fstream>
#include <sstream>

namespace gmmtune::io {

namespace {

Eigen::MatrixXd parse_matrix(const nlohmann::json& j, const std::string& name) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError("field '" + name + "' must be a 2-D array of numbers");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Eigen::MatrixXd M(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw ConfigError("field '" + name + "' has ragged rows");
        for (std::size_t k = 0; k < cols; ++k) {
            if (!j[i][k].is_number())
                throw ConfigError("field '" + name + "' contains a non-number");
            M(i, k) = j[i][k].get<double>();
        }
    }
    return M;
}

Eigen::VectorXd parse_vector(const nlohmann::json& j, const std::string& name) {
    if (!j.is_array()) throw ConfigError("field '" + name + "' must be an array");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number())
            throw ConfigError("field '" + name + "' contains a non-number");
        v(i) = j[i].get<double>();
    }
    return v;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

} // namespace

LtiSystem parse_system(const nlohmann::json& j) {
    for (const char* field : {"F", "C", "L"})
        if (!j.contains(field))
            throw ConfigError(std::string("system: missing field '") + field + "'");
    const Eigen::MatrixXd F = parse_matrix(j["F"], "F");
    const Eigen::MatrixXd C = parse_matrix(j["C"], "C");
    const Eigen::MatrixXd L = parse_matrix(j["L"], "L");
    Eigen::MatrixXd G;
    if (j.contains("G"))
        G = parse_matrix(j["G"], "G");
    else
        G = Eigen::MatrixXd::Zero(F.rows(), 1);
    try {
        return LtiSystem(F, G, C, L);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("system: ") + e.what());
    }
}

Gmm parse_gmm(const nlohmann::json& j) {
    if (!j.contains("dim") || !j["dim"].is_number_integer())
        throw ConfigError("gmm: missing integer field 'dim'");
    if (!j.contains("modes") || !j["modes"].is_array() || j["modes"].empty())
        throw ConfigError("gmm: missing nonempty array field 'modes'");
    Gmm g;
    g.dim = j["dim"].get<int>();
    for (const auto& mj : j["modes"]) {
        GaussianMode mode;
        if (!mj.contains("weight") || !mj["weight"].is_number())
            throw ConfigError("gmm: mode missing numeric 'weight'");
        mode.weight = mj["weight"].get<double>();
        mode.mean = parse_vector(mj.at("mean"), "mean");
        mode.cov = parse_matrix(mj.at("cov"), "cov");
        g.modes.push_back(std::move(mode));
    }
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return g;
}

nlohmann::json gmm_to_json(const Gmm& g) {
    nlohmann::json j;
    j["dim"] = g.dim;
    j["modes"] = nlohmann::json::array();
    for (const auto& m : g.modes) {
        nlohmann::json mj;
        mj["weight"] = m.weight;
        mj["mean"] = vector_to_json(m.mean);
        mj["cov"] = matrix_to_json(m.cov);
        j["modes"].push_back(mj);
    }
    return j;
}

nlohmann::json residual_model_to_json(const ResidualModel& model) {
    nlohmann::json j = gmm_to_json(model.mixture);
    j["k_star"] = model.k_star;
    j["reduction"] = {{"d_mu", model.reduction.d_mu}, {"d_K", model.reduction.d_K}};
    j["overall_mean"] = vector_to_json(model.overall_mean);
    j["overall_cov"] = matrix_to_json(model.overall_cov);
    j["mode_count_exact"] = model.mode_count_exact;
    j["mode_count_reduced"] = model.mixture.modes.size();
    return j;
}

nlohmann::json tuning_report_to_json(const TuningReport& report) {
    nlohmann::json j;
    j["alpha"] = report.alpha;
    j["false_alarm"] = report.false_alarm;
    j["mode_masses"] = report.mode_masses;
    j["mode_weights"] = report.mode_weights;
    nlohmann::json alphas = nlohmann::json::array();
    for (double a : report.per_mode_alphas) {
        if (std::isinf(a))
            alphas.push_back("inf");
        else
            alphas.push_back(a);
    }
    j["per_mode_alphas"] = alphas;
    j["quadrature_error_estimate"] = report.quadrature_error_estimate;
    j["method"] = report.method;
    return j;
}

nlohmann::json empirical_summary_to_json(const EmpiricalSummary& s) {
    nlohmann::json j;
    j["sample_count"] = s.sample_count;
    j["alarm_rate"] = s.alarm_rate;
    j["mean"] = vector_to_json(s.mean);
    j["cov"] = matrix_to_json(s.cov);
    return j;
}

std::vector<Eigen::VectorXd> read_csv_vectors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CSV file: " + path);
    std::vector<Eigen::VectorXd> rows;
    std::string line;
    Eigen::Index width = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> values;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("CSV: non-numeric cell '" + cell + "' in " + path);
            }
        }
        if (width < 0) width = static_cast<Eigen::Index>(values.size());
        if (static_cast<Eigen::Index>(values.size()) != width)
            throw ConfigError("CSV: ragged row in " + path);
        rows.push_back(Eigen::Map<Eigen::VectorXd>(values.data(), width));
    }
    if (rows.empty()) throw ConfigError("CSV: no data rows in " + path);
    return rows;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
}

} // namespace gmmtune::io
