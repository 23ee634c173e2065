#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ggpp/tape.hpp"
#include "ggpp/tensor.hpp"
#include "ggpp/tokenizer.hpp"

namespace ggpp {

struct EncoderConfig {
    std::size_t n_layers = 4;
    std::size_t n_heads = 4;
    std::size_t d_model = 64;
    std::size_t d_ff = 256;
    std::size_t max_seq = 128;
    std::size_t vocab_size = 2000;
    std::uint64_t seed = 0;
    // Causal mirrors decoder-based embedding models; bidirectional mirrors
    // the encoder-based variant.
    bool causal = true;

    std::size_t head_dim() const { return d_model / n_heads; }
    void validate() const;
};

struct LayerWeights {
    // One projection set per head: d_model x head_dim for q/k/v,
    // head_dim x d_model for the output projection.
    std::vector<Tensor> wq, wk, wv, wo;
    Tensor w_fc;   // d_model x d_ff
    Tensor w_proj; // d_ff x d_model
    Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};

struct EncoderWeights {
    EncoderConfig cfg;
    Tensor tok_emb; // vocab_size x d_model
    Tensor pos_emb; // max_seq x d_model
    std::vector<LayerWeights> layers;
};

// Per-layer states exposed for probing: h[l] = h[l-1] + a[l] + m[l].
struct ForwardTrace {
    std::vector<Tensor> h;        // n_layers+1 entries of [n x d_model]; h[0] = input embedding
    std::vector<Tensor> attn_out; // n_layers x [n x d_model]
    std::vector<Tensor> mlp_out;  // n_layers x [n x d_model]
    std::vector<std::vector<Tensor>> attn; // [layer][head] -> [n x n]
    Tensor embedding;             // mean over non-PAD positions of h.back()
};

inline constexpr double kLayerNormEps = 1e-5;

EncoderWeights init_weights(const EncoderConfig& cfg);

// Full forward pass with trace. `pad_id`, when set, excludes PAD positions
// from the mean-pooled embedding.
ForwardTrace forward(const EncoderWeights& w, const std::vector<TokenId>& ids,
                     std::optional<TokenId> pad_id = std::nullopt);

// Embedding only, skipping trace bookkeeping. Used by the attack's inner
// candidate-evaluation loop.
Tensor embed(const EncoderWeights& w, const std::vector<TokenId>& ids,
             std::optional<TokenId> pad_id = std::nullopt);

struct TapedForward {
    Tape::Var embedding;
    std::vector<Tape::Var> hidden; // per-layer hidden state nodes
};

// Differentiable forward from a relaxed one-hot matrix [n x vocab_size].
// Each row must sum to 1 within 1e-9.
TapedForward forward_from_onehot(const EncoderWeights& w, Tape& tape, Tape::Var onehot);

Tensor onehot_rows(const std::vector<TokenId>& ids, std::size_t vocab_size);

void save_weights(const EncoderWeights& w, const std::string& path);
EncoderWeights load_weights(const std::string& path);

// Self-supervised warm-up: a few hundred Adam steps of next-token
// prediction on the given texts. Random encoders may not separate
// passages; this nudges the embedding space apart.
struct WarmupConfig {
    std::size_t steps = 300;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
};

void warmup_lm(EncoderWeights& w, const Vocabulary& vocab,
               const std::vector<std::string>& texts, const WarmupConfig& cfg);

// Second warm-up phase: in-batch contrastive alignment of (prompt, passage)
// pairs. Next-token training alone leaves prompt->passage retrieval near
// chance at this scale; this phase pulls each prompt embedding toward its
// own passage and away from the other passages in the batch.
struct AlignConfig {
    std::size_t steps = 300;
    double learning_rate = 1e-3;
    std::size_t batch = 16;
    double temperature = 0.05;
    std::uint64_t seed = 2;
};

void warmup_align(EncoderWeights& w, const Vocabulary& vocab,
                  const std::vector<std::pair<std::string, std::string>>& pairs,
                  const AlignConfig& cfg);

namespace detail {

// Taped encoder core shared by the gradient path, the warm-up loop, and
// the gradient-oracle tests. Leaves mirror EncoderWeights field order.
struct TapedWeights {
    Tape::Var tok_emb, pos_emb;
    struct Layer {
        std::vector<Tape::Var> wq, wk, wv, wo;
        Tape::Var w_fc, w_proj, ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    };
    std::vector<Layer> layers;
};

TapedWeights make_leaves(const EncoderWeights& w, Tape& tape);

struct TapedEncoderOut {
    Tape::Var last_hidden;
    std::vector<Tape::Var> hidden;
};

TapedEncoderOut taped_encoder(const EncoderWeights& w, Tape& tape, Tape::Var onehot,
                              const TapedWeights& tw);

} // namespace detail

} // namespace ggpp
