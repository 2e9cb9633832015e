// Batch front end: run a config file or builtin preset, write CSV/JSON
// results and a run manifest.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "rankreg/config.hpp"

namespace fs = std::filesystem;
using namespace rankreg;

namespace {

std::string timestamp_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void print_plan(const config::RunConfig& cfg) {
    std::cout << "experiment plan (" << cfg.experiments.size() << " experiments):\n";
    for (const auto& e : cfg.experiments) {
        std::cout << "  " << e.id << " [" << mc::to_string(e.kind) << "] T_grid={";
        for (size_t i = 0; i < e.T_grid.size(); ++i)
            std::cout << (i ? "," : "") << e.T_grid[i];
        std::cout << "} R=" << e.R << " estimators={";
        for (size_t i = 0; i < e.estimators.size(); ++i)
            std::cout << (i ? "," : "") << estimators::to_string(e.estimators[i]);
        std::cout << "} seed=" << e.seed << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rank-restricted regression Monte Carlo harness"};

    std::string config_path, preset, out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_given = false, dry_run = false, do_list = false;
    int threads = 1;

    app.add_option("--config", config_path, "experiment configuration file (JSON)");
    app.add_option("--preset", preset, "builtin preset name (see --list-presets)");
    app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "master seed override");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--dry-run", dry_run, "print the experiment plan and exit");
    app.add_flag("--list-presets", do_list, "list builtin presets and exit");

    CLI11_PARSE(app, argc, argv);
    seed_given = seed_opt->count() > 0;

    if (do_list) {
        for (const auto& [name, desc] : config::list_presets())
            std::cout << name << "\n    " << desc << "\n";
        return 0;
    }

    config::RunConfig cfg;
    std::string config_source;
    try {
        if (!config_path.empty() && !preset.empty())
            throw Error(ErrorCode::ConfigError, "--config and --preset are mutually exclusive");
        if (!config_path.empty()) {
            cfg = config::load_config_file(config_path);
            config_source = config_path;
        } else if (!preset.empty()) {
            cfg = config::parse_config(config::preset_config_json(preset));
            config_source = "preset:" + preset;
        } else {
            throw Error(ErrorCode::ConfigError, "one of --config or --preset is required");
        }
        if (seed_given) config::override_master_seed(cfg, seed);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    if (dry_run) {
        print_plan(cfg);
        return 0;
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        std::cerr << "cannot create output directory " << out_dir << ": " << ec.message() << "\n";
        return 2;
    }

    nlohmann::json manifest;
    manifest["config"] = config_source;
    manifest["out_dir"] = out_dir;
    manifest["timestamp"] = timestamp_utc();
    manifest["library_version"] = config::kLibraryVersion;
    manifest["master_seed"] = cfg.master_seed;
    nlohmann::json statuses = nlohmann::json::array();
    std::vector<std::string> files = {"results.csv", "summary.json"};

    std::vector<mc::McResult> results;
    bool any_hard_failure = false;
    for (const auto& exp : cfg.experiments) {
        nlohmann::json status;
        status["id"] = exp.id;
        try {
            mc::McResult res = mc::run_experiment(exp, threads);
            any_hard_failure = any_hard_failure || res.hard_failure;
            status["status"] = res.hard_failure ? "hard_failure" : "ok";
            status["wall_ms"] = res.wall_ms;
            status["notes"] = res.notes;
            for (const auto& f : mc::write_plot_data(out_dir, res)) files.push_back(f);
            results.push_back(std::move(res));
        } catch (const Error& e) {
            std::cerr << "experiment " << exp.id << " failed: " << e.what() << "\n";
            status["status"] = "error";
            status["error"] = e.what();
            any_hard_failure = true;
        }
        statuses.push_back(status);
    }

    {
        std::ofstream os(out_dir + "/results.csv");
        mc::write_results_csv(os, results);
    }
    {
        std::ofstream os(out_dir + "/summary.json");
        os << config::results_summary_json(results) << "\n";
    }
    manifest["experiments"] = statuses;
    manifest["files"] = files;
    {
        std::ofstream os(out_dir + "/manifest.json");
        os << manifest.dump(2) << "\n";
    }

    // Human-readable summary table.
    std::cout << "experiment            statistic                                   value\n";
    for (const auto& res : results) {
        for (const auto& r : res.rows) {
            if (r.statistic.find("median_norm") != std::string::npos) continue; // plot data
            char line[160];
            std::snprintf(line, sizeof(line), "%-20s  %-10s %-6s %-24s %12.5g", res.experiment_id.c_str(),
                          r.estimator.c_str(), r.block.c_str(), (r.statistic + (r.T ? "@T=" + std::to_string(r.T) : "")).c_str(),
                          r.value);
            std::cout << line << "\n";
        }
        if (res.hard_failure) std::cout << "  ** hard failure in " << res.experiment_id << "\n";
    }

    return any_hard_failure ? 3 : 0;
}
