#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semiflow/scenario.hpp"

namespace fs = std::filesystem;

namespace {
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int run_one(const std::string& path, const std::string& out, bool quiet) {
    semiflow::ScenarioConfig cfg;
    try {
        cfg = semiflow::parse_config(path);
    } catch (const semiflow::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitConfig;
    }
    try {
        const semiflow::RunReport rep = semiflow::run(cfg, out, quiet);
        return rep.all_pass() ? kExitOk : kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
}
} // namespace

int main(int argc, char** argv) {
    CLI::App app{"semiflow: periodic semiflow eigenelements and Harris certificates"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", batch_dir, report_path;
    bool quiet = false;
    app.add_flag("--quiet", quiet, "suppress per-verdict output");

    auto* cmd_run = app.add_subcommand("run", "run one scenario config");
    cmd_run->add_option("config", config_path, "scenario JSON file")->required();
    cmd_run->add_option("--out", out_dir, "output directory base");

    auto* cmd_validate = app.add_subcommand("validate", "validate a scenario config");
    cmd_validate->add_option("config", config_path, "scenario JSON file")->required();

    auto* cmd_batch = app.add_subcommand("batch", "run every *.json config in a directory");
    cmd_batch->add_option("dir", batch_dir, "directory of configs")->required();
    cmd_batch->add_option("--out", out_dir, "output directory base");

    auto* cmd_plots = app.add_subcommand("plots", "emit gnuplot scripts for a report");
    cmd_plots->add_option("report", report_path, "report.json path")->required();

    CLI11_PARSE(app, argc, argv);

    if (cmd_run->parsed()) return run_one(config_path, out_dir, quiet);

    if (cmd_validate->parsed()) {
        try {
            const semiflow::ScenarioConfig cfg = semiflow::parse_config(config_path);
            if (!quiet) std::printf("valid: %s\n", semiflow::config_hash(cfg.echo).c_str());
            return kExitOk;
        } catch (const semiflow::ConfigError& e) {
            std::fprintf(stderr, "%s\n", e.what());
            return kExitConfig;
        }
    }

    if (cmd_batch->parsed()) {
        std::vector<std::string> paths;
        for (const auto& entry : fs::directory_iterator(batch_dir))
            if (entry.path().extension() == ".json") paths.push_back(entry.path().string());
        std::sort(paths.begin(), paths.end());
        if (paths.empty()) {
            std::fprintf(stderr, "batch: no *.json configs in %s\n", batch_dir.c_str());
            return kExitConfig;
        }
        int worst = kExitOk;
        for (const auto& p : paths) {
            if (!quiet) std::printf("== %s\n", p.c_str());
            worst = std::max(worst, run_one(p, out_dir, quiet));
        }
        return worst;
    }

    if (cmd_plots->parsed()) {
        try {
            const auto scripts = semiflow::emit_plots(report_path);
            if (!quiet)
                for (const auto& s : scripts) std::printf("wrote %s\n", s.c_str());
            return kExitOk;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return kExitNumerical;
        }
    }
    return kExitConfig;
}
