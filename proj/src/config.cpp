#include "rankreg/config.hpp"

#include "rankreg/rng.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rankreg::config {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::ConfigError, path + ": " + what);
}

const json& need(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) bad(path + "." + key, "missing");
    return j.at(key);
}

double num(const json& j, const std::string& path) {
    if (!j.is_number()) bad(path, "expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) bad(path, "expected an integer");
    return j.get<int>();
}

std::string str(const json& j, const std::string& path) {
    if (!j.is_string()) bad(path, "expected a string");
    return j.get<std::string>();
}

Matrix matrix(const json& j, const std::string& path) {
    if (!j.is_array()) bad(path, "expected a matrix (array of row arrays)");
    if (j.empty()) return Matrix(0, 0);
    const int rows = static_cast<int>(j.size());
    if (!j[0].is_array()) bad(path, "expected row arrays");
    const int cols = static_cast<int>(j[0].size());
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols)
            bad(path, "ragged rows");
        for (int c = 0; c < cols; ++c)
            m(i, c) = num(j[i][c], path + "[" + std::to_string(i) + "][" + std::to_string(c) + "]");
    }
    return m;
}

dgp::DgpSpec parse_dgp(const json& j, const std::string& path) {
    const std::string builder = str(need(j, "builder", path), path + ".builder");
    auto geti = [&](const char* key) { return integer(need(j, key, path), path + "." + key); };
    auto getu = [&](const char* key) -> std::uint64_t {
        const json& v = need(j, key, path);
        if (!v.is_number_integer()) bad(path + "." + key, "expected an integer seed");
        return v.get<std::uint64_t>();
    };

    try {
        if (builder == "random" || builder == "cy_positive" || builder == "stationary") {
            const int s = geti("s"), m_r = geti("m_r"), m_u = geti("m_u"), n = geti("n");
            const std::uint64_t seed = getu("seed");
            if (builder == "stationary")
                return dgp::make_random_spec(s, m_r, m_u, 0, 0, n, 0, seed);
            const int c_r = geti("c_r"), c_u = geti("c_u"), c_y = geti("c_y");
            if (builder == "cy_positive")
                return dgp::make_cy_positive_spec(s, m_r, m_u, c_r, c_u, n, c_y, seed);
            return dgp::make_random_spec(s, m_r, m_u, c_r, c_u, n, c_y, seed);
        }
        if (builder == "anderson_var1") {
            return dgp::make_anderson_var1(
                matrix(need(j, "upsilon22", path), path + ".upsilon22"),
                matrix(need(j, "sigma_w", path), path + ".sigma_w"), geti("c_y_block"));
        }
        if (builder == "johansen_vecm") {
            std::vector<Matrix> lags;
            if (j.contains("lag_coeffs")) {
                const json& arr = j.at("lag_coeffs");
                if (!arr.is_array()) bad(path + ".lag_coeffs", "expected an array of matrices");
                for (size_t i = 0; i < arr.size(); ++i)
                    lags.push_back(
                        matrix(arr[i], path + ".lag_coeffs[" + std::to_string(i) + "]"));
            }
            return dgp::make_johansen_vecm(matrix(need(j, "alpha", path), path + ".alpha"),
                                           matrix(need(j, "beta", path), path + ".beta"), lags,
                                           matrix(need(j, "sigma", path), path + ".sigma"));
        }
        if (builder == "raw") {
            dgp::DgpSpec spec;
            spec.s = geti("s");
            spec.m_r = geti("m_r");
            spec.m_u = geti("m_u");
            spec.k = geti("k");
            spec.c_r = geti("c_r");
            spec.c_u = geti("c_u");
            spec.n = geti("n");
            spec.Lambda = matrix(need(j, "Lambda", path), path + ".Lambda");
            spec.Sigma = matrix(need(j, "Sigma", path), path + ".Sigma");
            spec.b_r = matrix(need(j, "b_r", path), path + ".b_r");
            spec.b_u = j.contains("b_u") ? matrix(j.at("b_u"), path + ".b_u")
                                         : Matrix(spec.s, spec.m_u);
            if (spec.b_u.size() == 0) spec.b_u = Matrix::Zero(spec.s, spec.m_u);
            spec.H_r = matrix(need(j, "H_r", path), path + ".H_r");
            spec.H_u = j.contains("H_u") ? matrix(j.at("H_u"), path + ".H_u") : Matrix(0, 0);
            if (spec.m_u == 0) spec.H_u = Matrix(0, 0);
            const json& ma = need(j, "ma_coeffs", path);
            if (!ma.is_array()) bad(path + ".ma_coeffs", "expected an array of matrices");
            for (size_t i = 0; i < ma.size(); ++i)
                spec.ma_coeffs.push_back(
                    matrix(ma[i], path + ".ma_coeffs[" + std::to_string(i) + "]"));
            if (j.contains("noise")) {
                const std::string noise = str(j.at("noise"), path + ".noise");
                if (noise == "gaussian") spec.noise = dgp::NoiseKind::Gaussian;
                else if (noise == "uniform") spec.noise = dgp::NoiseKind::Uniform;
                else bad(path + ".noise", "expected gaussian|uniform");
            }
            if (j.contains("burn_in")) spec.burn_in = integer(j.at("burn_in"), path + ".burn_in");
            spec.validate();
            return spec;
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        bad(path, e.what());
    }
    bad(path + ".builder", "unknown builder '" + builder + "'");
}

mc::ExperimentConfig parse_experiment(const json& j, const std::string& path,
                                      std::uint64_t master_seed, size_t index) {
    mc::ExperimentConfig cfg;
    cfg.id = str(need(j, "id", path), path + ".id");

    const std::string kind = str(need(j, "kind", path), path + ".kind");
    if (kind == "rate") cfg.kind = mc::ExperimentKind::Rate;
    else if (kind == "identity") cfg.kind = mc::ExperimentKind::Identity;
    else if (kind == "matched") cfg.kind = mc::ExperimentKind::Matched;
    else if (kind == "dist") cfg.kind = mc::ExperimentKind::Dist;
    else bad(path + ".kind", "expected rate|identity|matched|dist");

    cfg.spec = parse_dgp(need(j, "dgp", path), path + ".dgp");

    const json& ests = need(j, "estimators", path);
    if (!ests.is_array() || ests.empty()) bad(path + ".estimators", "expected a nonempty array");
    for (size_t i = 0; i < ests.size(); ++i) {
        const std::string name = str(ests[i], path + ".estimators[" + std::to_string(i) + "]");
        if (name == "OLS") cfg.estimators.push_back(mc::Method::OLS);
        else if (name == "RRR") cfg.estimators.push_back(mc::Method::RRR);
        else if (name == "FM_OLS") cfg.estimators.push_back(mc::Method::FM_OLS);
        else if (name == "FM_RRR") cfg.estimators.push_back(mc::Method::FM_RRR);
        else bad(path + ".estimators[" + std::to_string(i) + "]",
                 "expected OLS|RRR|FM_OLS|FM_RRR");
    }

    cfg.n = j.contains("n") ? integer(j.at("n"), path + ".n") : cfg.spec.n;

    const json& grid = need(j, "T_grid", path);
    if (!grid.is_array() || grid.empty()) bad(path + ".T_grid", "expected a nonempty array");
    for (size_t i = 0; i < grid.size(); ++i)
        cfg.T_grid.push_back(integer(grid[i], path + ".T_grid[" + std::to_string(i) + "]"));

    cfg.R = integer(need(j, "R", path), path + ".R");
    cfg.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>()
                                  : derive_seed(master_seed, index);

    if (j.contains("kernel")) {
        const json& k = j.at("kernel");
        if (k.contains("kernel")) {
            const std::string name = str(k.at("kernel"), path + ".kernel.kernel");
            if (name == "quartic") cfg.kernel.kernel = covest::KernelKind::Quartic;
            else if (name == "parzen") cfg.kernel.kernel = covest::KernelKind::Parzen;
            else bad(path + ".kernel.kernel", "expected quartic|parzen");
        }
        if (k.contains("b")) cfg.kernel.b = num(k.at("b"), path + ".kernel.b");
        if (k.contains("c")) cfg.kernel.c = num(k.at("c"), path + ".kernel.c");
        try {
            cfg.kernel.validate();
        } catch (const Error& e) {
            bad(path + ".kernel.b", e.what());
        }
    }

    if (j.contains("preprocessing")) {
        const std::string p = str(j.at("preprocessing"), path + ".preprocessing");
        if (p == "none") cfg.preprocessing = dgp::Preproc::None;
        else if (p == "demean") cfg.preprocessing = dgp::Preproc::Demean;
        else if (p == "detrend") cfg.preprocessing = dgp::Preproc::Detrend;
        else bad(path + ".preprocessing", "expected none|demean|detrend");
    }
    if (j.contains("limit_grid_N"))
        cfg.limit_grid_N = integer(j.at("limit_grid_N"), path + ".limit_grid_N");

    try {
        cfg.validate();
    } catch (const Error& e) {
        bad(path, e.what());
    }
    return cfg;
}

} // namespace

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("config: invalid JSON: ") + e.what());
    }
    RunConfig cfg;
    if (j.contains("master_seed")) {
        if (!j.at("master_seed").is_number_integer()) bad("master_seed", "expected an integer");
        cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    }
    const json& exps = need(j, "experiments", "config");
    if (!exps.is_array() || exps.empty()) bad("experiments", "expected a nonempty array");
    for (size_t i = 0; i < exps.size(); ++i)
        cfg.experiments.push_back(parse_experiment(
            exps[i], "experiments[" + std::to_string(i) + "]", cfg.master_seed, i));
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::IoError, "cannot open config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

void override_master_seed(RunConfig& cfg, std::uint64_t seed) {
    cfg.master_seed = seed;
    for (size_t i = 0; i < cfg.experiments.size(); ++i)
        cfg.experiments[i].seed = derive_seed(seed, i);
}

std::vector<std::pair<std::string, std::string>> list_presets() {
    return {
        {"stationary",
         "all-stationary regressors: rate check, exact identities, and the Kronecker "
         "covariance comparison for OLS and FM-OLS"},
        {"anderson-var1",
         "VAR(1) I(1) model in canonical coordinates: identity suite plus the matched "
         "OLS/RRR/FM comparison"},
        {"johansen-vecm",
         "cointegrated VAR(p) mapped to the regression form: identity suite and rate "
         "verification for the quasi-ML estimator"},
        {"cy-positive",
         "rank restriction binding on integrated directions (c_y > 0): T and sqrt(T) "
         "rate verification plus correction-structure shrinkage"},
        {"fm-comparison",
         "fully modified vs rank-restricted estimation: distributional agreement of the "
         "integrated-column errors at T = 1000"},
    };
}

std::string preset_config_json(const std::string& name) {
    json j;
    j["master_seed"] = 20240101;
    json exps = json::array();

    // wide band: keeps the over-differenced long-run blocks well conditioned
    auto kernel = json{{"kernel", "quartic"}, {"b", 0.5}, {"c", 1.0}};
    auto anderson_dgp = json{{"builder", "anderson_var1"},
                             {"upsilon22", json::array({json::array({-0.5})})},
                             {"sigma_w", json::array({json::array({1.0, 0.4}),
                                                      json::array({0.4, 1.0})})},
                             {"c_y_block", 1}};
    auto johansen_dgp = json{
        {"builder", "johansen_vecm"},
        {"alpha", json::array({json::array({-0.4}), json::array({0.2})})},
        {"beta", json::array({json::array({1.0}), json::array({-0.8})})},
        {"lag_coeffs",
         json::array({json::array({json::array({0.2, 0.0}), json::array({0.05, 0.15})})})},
        {"sigma", json::array({json::array({1.0, 0.3}), json::array({0.3, 1.0})})}};
    auto cy_dgp = json{{"builder", "cy_positive"}, {"s", 3}, {"m_r", 3}, {"m_u", 0},
                       {"c_r", 2},                {"c_u", 0}, {"n", 2},  {"c_y", 1},
                       {"seed", 7}};
    auto stationary_dgp = json{{"builder", "stationary"}, {"s", 2}, {"m_r", 3},
                               {"m_u", 1},                {"n", 1}, {"seed", 11}};

    if (name == "stationary") {
        exps.push_back({{"id", "stationary-rate"},
                        {"kind", "rate"},
                        {"dgp", stationary_dgp},
                        {"estimators", json::array({"OLS", "RRR"})},
                        {"n", 1},
                        {"T_grid", json::array({200, 400, 800, 1600, 3200})},
                        {"R", 500},
                        {"kernel", kernel}});
        exps.push_back({{"id", "stationary-identity"},
                        {"kind", "identity"},
                        {"dgp", stationary_dgp},
                        {"estimators", json::array({"OLS", "RRR", "FM_OLS", "FM_RRR"})},
                        {"n", 1},
                        {"T_grid", json::array({400})},
                        {"R", 100},
                        {"kernel", kernel}});
        exps.push_back({{"id", "stationary-cov"},
                        {"kind", "dist"},
                        {"dgp", stationary_dgp},
                        {"estimators", json::array({"OLS", "FM_OLS"})},
                        {"n", 1},
                        {"T_grid", json::array({2000})},
                        {"R", 2000},
                        {"kernel", kernel}});
    } else if (name == "anderson-var1") {
        exps.push_back({{"id", "anderson-identity"},
                        {"kind", "identity"},
                        {"dgp", anderson_dgp},
                        {"estimators", json::array({"OLS", "RRR", "FM_OLS", "FM_RRR"})},
                        {"n", 1},
                        {"T_grid", json::array({400})},
                        {"R", 100},
                        {"kernel", kernel}});
        exps.push_back({{"id", "anderson-matched"},
                        {"kind", "matched"},
                        {"dgp", anderson_dgp},
                        {"estimators", json::array({"OLS", "RRR", "FM_OLS"})},
                        {"n", 1},
                        {"T_grid", json::array({250, 500, 1000})},
                        {"R", 200},
                        {"kernel", kernel}});
    } else if (name == "johansen-vecm") {
        exps.push_back({{"id", "johansen-identity"},
                        {"kind", "identity"},
                        {"dgp", johansen_dgp},
                        {"estimators", json::array({"OLS", "RRR", "FM_OLS", "FM_RRR"})},
                        {"n", 1},
                        {"T_grid", json::array({400})},
                        {"R", 100},
                        {"kernel", kernel}});
        exps.push_back({{"id", "johansen-rate"},
                        {"kind", "rate"},
                        {"dgp", johansen_dgp},
                        {"estimators", json::array({"OLS", "RRR"})},
                        {"n", 1},
                        {"T_grid", json::array({200, 400, 800, 1600})},
                        {"R", 300},
                        {"kernel", kernel}});
    } else if (name == "cy-positive") {
        exps.push_back({{"id", "cy-rate"},
                        {"kind", "rate"},
                        {"dgp", cy_dgp},
                        {"estimators", json::array({"OLS", "RRR"})},
                        {"n", 2},
                        {"T_grid", json::array({200, 400, 800, 1600, 3200})},
                        {"R", 500},
                        {"kernel", kernel}});
        exps.push_back({{"id", "cy-matched"},
                        {"kind", "matched"},
                        {"dgp", cy_dgp},
                        {"estimators", json::array({"OLS", "RRR"})},
                        {"n", 2},
                        {"T_grid", json::array({400, 800, 1600})},
                        {"R", 500},
                        {"kernel", kernel}});
    } else if (name == "fm-comparison") {
        exps.push_back({{"id", "fm-dist"},
                        {"kind", "dist"},
                        {"dgp", anderson_dgp},
                        {"estimators", json::array({"OLS", "RRR", "FM_OLS", "FM_RRR"})},
                        {"n", 1},
                        {"T_grid", json::array({1000})},
                        {"R", 2000},
                        {"kernel", kernel},
                        {"limit_grid_N", 1000}});
        exps.push_back({{"id", "fm-matched"},
                        {"kind", "matched"},
                        {"dgp", anderson_dgp},
                        {"estimators", json::array({"OLS", "RRR", "FM_OLS"})},
                        {"n", 1},
                        {"T_grid", json::array({500, 1000})},
                        {"R", 500},
                        {"kernel", kernel}});
    } else {
        throw Error(ErrorCode::ConfigError, "unknown preset '" + name + "'");
    }

    j["experiments"] = exps;
    return j.dump(2);
}

std::string results_summary_json(const std::vector<mc::McResult>& results) {
    json j = json::array();
    for (const auto& res : results) {
        json rows = json::array();
        for (const auto& r : res.rows)
            rows.push_back({{"estimator", r.estimator},
                            {"T", r.T},
                            {"block", r.block},
                            {"statistic", r.statistic},
                            {"value", r.value},
                            {"reps", r.reps},
                            {"failures", r.failures}});
        j.push_back({{"experiment_id", res.experiment_id},
                     {"kind", mc::to_string(res.kind)},
                     {"hard_failure", res.hard_failure},
                     {"notes", res.notes},
                     {"rows", rows}});
    }
    return j.dump(2);
}

} // namespace rankreg::config
