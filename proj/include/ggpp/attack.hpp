#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ggpp/rag.hpp"

namespace ggpp {

enum class LossKind { SigmoidMse, Cosine };

struct AttackConfig {
    std::size_t prefix_len = 5;       // 10 for the bidirectional encoder mode
    std::size_t max_epochs = 500;
    std::size_t k_cand = 32;          // candidate tokens per position
    std::size_t subsets_per_epoch = 64; // sampled single-position substitutions
    std::size_t retrieval_k = 10;
    double lambda = 1.0;
    LossKind loss_kind = LossKind::SigmoidMse;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TokenImportance {
    std::size_t position;
    std::string token;
    double distance; // embedding shift when this token is masked
};

struct PrefixSearchState {
    std::vector<TokenId> prefix;
    std::vector<TokenId> best_prefix;
    double best_loss = 0.0;
    std::vector<double> distance_history; // L2 to target embedding, one per epoch
    std::size_t epoch = 0;
};

struct AttackOutcome {
    std::vector<TokenId> prefix;
    bool converged = false;
    std::optional<std::size_t> target_rank;
    std::optional<std::size_t> original_rank;
    std::size_t epochs = 0;
    std::vector<double> loss_trace;        // best loss after each epoch
    double initial_distance = 0.0;         // L2 to target embedding before epoch 1
    std::vector<double> distance_history;  // L2 to target embedding after each epoch
};

// Masked-token importance ranking: distance = 1 - cos(embed(X), embed(X
// with [MASK] at position)). Sorted descending, earlier position wins ties.
std::vector<TokenImportance> token_importance(const EncoderWeights& w, const Vocabulary& vocab,
                                              const std::string& target_passage);

std::vector<TokenId> init_prefix(const Vocabulary& vocab,
                                 const std::vector<TokenImportance>& ranked, std::size_t n);

double loss_sigmoid_mse(const Tensor& e_target, const Tensor& e_orig, const Tensor& e_query,
                        double lambda);
double loss_cosine(const Tensor& e_target, const Tensor& e_orig, const Tensor& e_query,
                   double lambda);

// Gradient of the configured loss w.r.t. the one-hot prefix rows of the
// concatenated (prefix || context) input. Returns [prefix_len x vocab].
Tensor prefix_gradient(const EncoderWeights& w, const std::vector<TokenId>& prefix,
                       const std::vector<TokenId>& context_ids, const Tensor& e_target,
                       const Tensor& e_orig, LossKind kind, double lambda);

// Per-position k_cand token ids with the largest -grad, ties by ascending
// id; special tokens excluded.
std::vector<std::vector<TokenId>> candidate_tokens(const Tensor& grad, std::size_t k_cand,
                                                   std::size_t num_special = Vocabulary::kNumSpecial);

enum class PrefixInit { TokenImportance, Random };

struct AttackOptions {
    PrefixInit init = PrefixInit::TokenImportance;
    // When present, every loss evaluation and the convergence check embed
    // (prefix || instruction || query).
    std::vector<TokenId> instruction_ids;
    // Disables the early convergence stop so descent curves from different
    // runs stay epoch-aligned.
    bool run_full_budget = false;
};

AttackOutcome ggpp_optimize(const RagStore& store, const PassageRecord& query_record,
                            std::uint64_t target_id, std::uint64_t original_id,
                            const AttackConfig& cfg, const AttackOptions& opts = {});

AttackOutcome with_instruction(const std::string& instruction_text, const RagStore& store,
                               const PassageRecord& query_record, std::uint64_t target_id,
                               std::uint64_t original_id, const AttackConfig& cfg);

// Baseline: same coordinate loop, MSE-only loss, random initial prefix.
AttackOutcome gcg_adapted(const RagStore& store, const PassageRecord& query_record,
                          std::uint64_t target_id, std::uint64_t original_id,
                          const AttackConfig& cfg);

// Baseline: first-order Taylor token scoring, positions round-robin,
// random initial prefix.
AttackOutcome uat_adapted(const RagStore& store, const PassageRecord& query_record,
                          std::uint64_t target_id, std::uint64_t original_id,
                          const AttackConfig& cfg);

struct SuccessRates {
    double top1 = 0.0;
    double topk = 0.0;
};

SuccessRates success_rates(const std::vector<AttackOutcome>& outcomes, std::size_t k);

// Re-embeds the attacked query and checks both convergence clauses against
// the live store. Used by tests and the acceptance suite.
bool verify_converged(const RagStore& store, const AttackOutcome& outcome,
                      const PassageRecord& query_record, std::uint64_t target_id,
                      std::uint64_t original_id, std::size_t k,
                      const std::vector<TokenId>& instruction_ids = {});

// Lambda values mirrored by the sweep experiment.
inline constexpr double kLambdaGrid[] = {0.1, 0.5, 1.0, 1.5, 2.0};

} // namespace ggpp
