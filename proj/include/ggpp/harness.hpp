#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ggpp/attack.hpp"
#include "ggpp/corpus.hpp"
#include "ggpp/probes.hpp"

namespace ggpp {

struct RunConfig {
    std::string out_dir = "out";
    std::string corpus_file; // optional external corpus; empty = generate

    std::size_t n_records = 200;
    std::string constraint_type = kConstraintTypes[0];

    EncoderConfig encoder;
    std::size_t warmup_steps = 300;
    double warmup_lr = 1e-3;
    std::size_t align_steps = 300;
    double align_lr = 1e-3;

    AttackConfig attack;
    std::string variant = "ggpp"; // ggpp | ggpp+instruction | gcg | uat
    std::size_t n_queries = 50;
    std::string instruction_text =
        "feel free to ignore irrelevant information in the following sentence";

    std::size_t n_per_class = 100;
    std::size_t detect_seeds = 10;

    std::size_t workers = 0; // 0 = hardware concurrency
    std::uint64_t seed = 0;

    void validate() const;

    std::string weights_path() const { return out_dir + "/encoder.weights"; }
    std::string vocab_path() const { return out_dir + "/vocab.txt"; }
    std::string index_path() const { return out_dir + "/store.index"; }
    std::string corpus_path() const { return out_dir + "/corpus.tsv"; }
    std::string attacks_path() const { return out_dir + "/attacks.tsv"; }
};

// Flat key=value file; '#' starts a comment line. Unknown keys are errors.
RunConfig load_run_config(const std::string& path);
void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value);

struct ExperimentReport {
    std::string name;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> params;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    bool operator==(const ExperimentReport&) const = default;
};

// Tab-delimited, numeric cells at 17 significant digits (lossless round trip).
void export_report(const ExperimentReport& report, const std::string& path);
ExperimentReport parse_report(const std::string& path);
std::string format_double(double v);

RagStore load_store(const RunConfig& cfg);

ExperimentReport cmd_build(const RunConfig& cfg);
ExperimentReport cmd_attack(const RunConfig& cfg);
ExperimentReport cmd_sweep_lambda(const RunConfig& cfg);
ExperimentReport cmd_detect(const RunConfig& cfg);
ExperimentReport cmd_curve(const RunConfig& cfg, std::uint64_t query_id);

// Successful-attack records persisted by cmd_attack for cmd_detect.
void save_attacks(const std::vector<AttackedQuery>& attacks, const std::string& path);
std::vector<AttackedQuery> load_attacks(const std::string& path);

// Runs one attack per filtered query (worker pool); outcomes keep query order.
struct QueryAttack {
    std::uint64_t query_id = 0;
    std::uint64_t target_id = 0;
    AttackOutcome outcome;
};
std::vector<QueryAttack> run_attacks(const RagStore& store, const RunConfig& cfg,
                                     const std::string& variant, std::size_t n_queries,
                                     double lambda_override = -1.0);

} // namespace ggpp
