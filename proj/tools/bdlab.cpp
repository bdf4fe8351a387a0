#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bd/acceptance.hpp"
#include "bd/config.hpp"
#include "bd/experiments.hpp"
#include "bd/io.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& out_dir, std::uint64_t seed, bool seed_set, int threads) {
    bd::json raw;
    {
        std::ifstream in(config_path);
        if (!in) {
            std::fprintf(stderr, "error: cannot read config file %s\n", config_path.c_str());
            return 2;
        }
        try {
            in >> raw;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "error: config is not valid JSON: %s\n", e.what());
            return 2;
        }
    }
    bd::RunContext ctx;
    try {
        for (const auto& ov : overrides) bd::apply_override(raw, ov);
        bd::ConfigReader cfg(raw);
        ctx.out = out_dir.empty() ? cfg.get<std::string>("", "out", "reports") : out_dir;
        cfg.record("", "out", ctx.out.string());
        ctx.seed = seed_set ? seed : cfg.get<std::uint64_t>("", "seed", 12345);
        cfg.record("", "seed", ctx.seed);
        ctx.threads = (threads > 0) ? threads : cfg.get<int>("", "threads", 1);
        cfg.record("", "threads", ctx.threads);
        std::filesystem::create_directories(ctx.out);

        bd::json report;
        try {
            const bd::json body = bd::run_experiment(cfg, ctx);
            report["experiment"] = cfg.resolved().at("experiment");
            report["config"] = cfg.resolved();
            bd::json hashed = cfg.resolved();
            hashed.erase("out");
            hashed.erase("threads");
            report["config_hash"] = bd::config_hash(hashed);
            report["status"] = "ok";
            report["results"] = body;
            bd::save_json(ctx.out / "report.json", report);
            return 0;
        } catch (const bd::Error& e) {
            report["experiment"] = cfg.resolved().contains("experiment")
                                       ? cfg.resolved().at("experiment")
                                       : bd::json();
            report["config"] = cfg.resolved();
            bd::json hashed = cfg.resolved();
            if (hashed.contains("out")) hashed.erase("out");
            if (hashed.contains("threads")) hashed.erase("threads");
            report["config_hash"] = bd::config_hash(hashed);
            report["status"] = "failed";
            report["failure"] = {{"code", bd::to_string(e.code())}, {"message", e.what()}};
            bd::save_json(ctx.out / "report.json", report);
            std::fprintf(stderr, "numerical failure: %s\n", e.what());
            return 3;
        }
    } catch (const bd::ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

int cmd_verify(const std::string& suite) {
    bd::Suite s;
    if (suite == "fast") {
        s = bd::Suite::fast;
    } else if (suite == "full") {
        s = bd::Suite::full;
    } else {
        std::fprintf(stderr, "usage: bdlab verify {fast|full}\n");
        return 2;
    }
    bool all = true;
    bd::run_acceptance(s, [&](const bd::CriterionResult& r) {
        bd::print_criterion(r);
        all = all && r.pass;
    });
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Becker-Doring truncation lab: equilibria, dynamics, linearized operators, "
                 "interpolation diagnostics and decay experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 0;

    auto* run = app.add_subcommand("run", "run a configured experiment");
    run->add_option("config,--config", config_path, "JSON experiment configuration")->required();
    run->add_option("--override", overrides, "KEY=VALUE override, repeatable (dotted paths)");
    run->add_option("--out", out_dir, "output directory (defaults to config 'out')");
    auto* seed_opt = run->add_option("--seed", seed, "seed for all sampling");
    run->add_option("--threads", threads, "worker threads for sampling loops");

    std::string suite;
    auto* verify = app.add_subcommand("verify", "run the acceptance battery");
    verify->add_option("suite", suite, "fast or full");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (run->parsed()) return cmd_run(config_path, overrides, out_dir, seed, !seed_opt->empty(), threads);
    if (verify->parsed()) return cmd_verify(suite);
    return 2;
}
