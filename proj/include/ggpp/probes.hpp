#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ggpp/rag.hpp"

namespace ggpp {

enum class ProbeKind { Act, Sate };

const char* probe_name(ProbeKind kind);

struct FeatureVector {
    std::vector<double> values;
    ProbeKind kind = ProbeKind::Act;
    std::uint64_t source_id = 0;
};

// Last-layer hidden states, PAD slots zero-filled: d_model * n_pad values.
FeatureVector act_features(const ForwardTrace& trace, std::uint64_t source_id = 0,
                           std::size_t n_pad = kDetectionPadLen);

// Every attention matrix zero-padded to n_pad x n_pad: L * H * n_pad^2 values.
FeatureVector sate_features(const ForwardTrace& trace, std::uint64_t source_id = 0,
                            std::size_t n_pad = kDetectionPadLen);

// Control-group prefix: uniform sample without replacement from the top half
// of the passage's token-importance ranking.
std::vector<TokenId> control_prefix(const EncoderWeights& w, const Vocabulary& vocab,
                                    const std::string& original_passage,
                                    std::size_t prefix_len, std::uint64_t seed);

struct ProbeDataset {
    std::vector<FeatureVector> features;
    std::vector<int> labels; // 1 = GGPP-perturbed, 0 = control
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
};

// One successful attack: the found prefix plus the query it perturbs.
struct AttackedQuery {
    std::uint64_t query_id = 0;
    std::vector<TokenId> prefix;
    std::string query_text;
    std::string original_passage; // control prefixes are drawn from here
};

ProbeDataset build_dataset(const std::vector<AttackedQuery>& attacks, const RagStore& store,
                           ProbeKind kind, std::size_t n_per_class = 100,
                           std::uint64_t seed = 0);

struct LogRegConfig {
    double l2 = 1e-3;
    double learning_rate = 0.1; // backtracked per step
    double grad_tolerance = 1e-6;
    std::size_t max_iters = 5000;
};

// Most feature dimensions never vary on the toy corpus (padding slots), so
// the model keeps only the active columns plus their index map.
struct LogRegModel {
    ProbeKind kind = ProbeKind::Act;
    std::size_t feature_len = 0;
    std::vector<std::size_t> active; // columns with nonzero train variance
    std::vector<double> mean, stdev; // per active column, from the train split
    std::vector<double> weights;     // per active column
    double bias = 0.0;
    std::size_t iterations = 0;
    double final_grad_norm = 0.0;

    std::size_t param_count() const { return feature_len + 1; }
    double score(const FeatureVector& f) const;   // w.x + b in standardized space
    double predict(const FeatureVector& f) const; // sigmoid(score)
};

LogRegModel train_logreg(const ProbeDataset& dataset, const LogRegConfig& cfg = {});

struct DetectionMetrics {
    double auroc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t runs_averaged = 1;
};

DetectionMetrics evaluate(const LogRegModel& model, const ProbeDataset& dataset);
DetectionMetrics average_metrics(const std::vector<DetectionMetrics>& runs);

// AUROC with midrank tie handling over raw scores.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

struct ProbeTiming {
    ProbeKind kind = ProbeKind::Act;
    double train_seconds = 0.0; // mean over runs
    double infer_seconds = 0.0; // mean single-sample time over runs
    std::size_t runs = 0;
};

std::vector<ProbeTiming> timing_report(const std::vector<AttackedQuery>& attacks,
                                       const RagStore& store, std::size_t n_per_class,
                                       std::size_t runs = 10, std::uint64_t seed = 0);

void save_probe(const LogRegModel& model, const std::string& path);
LogRegModel load_probe(const std::string& path);

} // namespace ggpp
