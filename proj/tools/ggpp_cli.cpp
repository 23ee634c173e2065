#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "ggpp/harness.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    long long seed = -1;
    long long k = -1;
    long long prefix_len = -1;
    double lambda = -1.0;
    std::string variant;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "flat key=value config file");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--seed", f.seed, "global seed");
    cmd->add_option("--k", f.k, "retrieval depth (default 10)");
    cmd->add_option("--prefix-len", f.prefix_len, "adversarial prefix length (default 5)");
    cmd->add_option("--lambda", f.lambda, "loss balance weight (default 1.0)");
    cmd->add_option("--variant", f.variant, "attack variant: ggpp|ggpp+instruction|gcg|uat");
}

ggpp::RunConfig resolve(const CommonFlags& f) {
    ggpp::RunConfig cfg;
    if (!f.config_path.empty()) cfg = ggpp::load_run_config(f.config_path);
    if (const char* env = std::getenv("GGPP_OUT_DIR")) cfg.out_dir = env;
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (f.seed >= 0)
        ggpp::apply_config_line(cfg, "seed", std::to_string(f.seed));
    if (f.k >= 0) ggpp::apply_config_line(cfg, "retrieval_k", std::to_string(f.k));
    if (f.prefix_len >= 0)
        ggpp::apply_config_line(cfg, "prefix_len", std::to_string(f.prefix_len));
    if (f.lambda >= 0.0)
        ggpp::apply_config_line(cfg, "lambda", ggpp::format_double(f.lambda));
    if (!f.variant.empty()) ggpp::apply_config_line(cfg, "variant", f.variant);
    cfg.validate();
    return cfg;
}

void print_report(const ggpp::ExperimentReport& r) {
    std::printf("report: %s (seed %llu)\n", r.name.c_str(),
                static_cast<unsigned long long>(r.seed));
    for (const auto& [k, v] : r.params) std::printf("  %s = %s\n", k.c_str(), v.c_str());
    std::printf("  rows: %zu\n", r.rows.size());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GGPP retrieval-perturbation laboratory"};
    app.require_subcommand(1);

    CommonFlags flags;
    unsigned long long curve_query = 0;

    CLI::App* build = app.add_subcommand("build", "generate corpus, warm up encoder, index");
    CLI::App* attack = app.add_subcommand("attack", "run prefix attacks over filtered queries");
    CLI::App* detect = app.add_subcommand("detect", "train and evaluate ACT/SATe probes");
    CLI::App* curve = app.add_subcommand("curve", "per-epoch descent curves for one query");
    CLI::App* sweep = app.add_subcommand("sweep-lambda", "success rates across the lambda grid");
    for (CLI::App* cmd : {build, attack, detect, curve, sweep}) add_common(cmd, flags);
    curve->add_option("query", curve_query, "query (passage) id")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        ggpp::RunConfig cfg = resolve(flags);
        ggpp::ExperimentReport report;
        if (build->parsed()) report = ggpp::cmd_build(cfg);
        else if (attack->parsed()) report = ggpp::cmd_attack(cfg);
        else if (detect->parsed()) report = ggpp::cmd_detect(cfg);
        else if (curve->parsed()) report = ggpp::cmd_curve(cfg, curve_query);
        else report = ggpp::cmd_sweep_lambda(cfg);
        print_report(report);
        return 0;
    } catch (const ggpp::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
