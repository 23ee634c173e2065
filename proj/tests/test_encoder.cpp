#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ggpp/encoder.hpp"
#include "ggpp/rng.hpp"

using namespace ggpp;

namespace {

EncoderConfig tiny_config() {
    EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 16;
    cfg.max_seq = 100;
    cfg.vocab_size = 20;
    cfg.seed = 42;
    return cfg;
}

std::vector<TokenId> tiny_ids() { return {3, 7, 4, 12, 5}; }

} // namespace

TEST_CASE("config validation") {
    EncoderConfig cfg = tiny_config();
    cfg.n_heads = 3; // 8 % 3 != 0
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.max_seq = 50; // below the detection padding length
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("residual identity holds per layer and token") {
    const EncoderWeights w = init_weights(tiny_config());
    const ForwardTrace t = forward(w, tiny_ids());
    REQUIRE(t.h.size() == w.cfg.n_layers + 1);
    for (std::size_t l = 0; l < w.cfg.n_layers; ++l)
        for (std::size_t i = 0; i < t.h[l].size(); ++i) {
            const double expect =
                t.h[l].data[i] + t.attn_out[l].data[i] + t.mlp_out[l].data[i];
            CHECK(std::abs(t.h[l + 1].data[i] - expect) < 1e-9);
        }
}

TEST_CASE("attention rows sum to one; causal support is lower-triangular") {
    const EncoderWeights w = init_weights(tiny_config());
    const std::size_t n = tiny_ids().size();
    const ForwardTrace t = forward(w, tiny_ids());
    for (const auto& layer : t.attn)
        for (const Tensor& a : layer) {
            REQUIRE(a.shape == std::vector<std::size_t>{n, n});
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    s += a.at(i, j);
                    if (j > i) CHECK(a.at(i, j) == 0.0);
                }
                CHECK(std::abs(s - 1.0) < 1e-9);
            }
        }
}

TEST_CASE("bidirectional attention attends forward too") {
    EncoderConfig cfg = tiny_config();
    cfg.causal = false;
    const EncoderWeights w = init_weights(cfg);
    const ForwardTrace t = forward(w, tiny_ids());
    bool any_forward = false;
    for (const Tensor& a : t.attn[0])
        if (a.at(0, 1) > 0.0) any_forward = true;
    CHECK(any_forward);
}

TEST_CASE("embedding equals the mean of last-layer hidden states") {
    const EncoderWeights w = init_weights(tiny_config());
    const ForwardTrace t = forward(w, tiny_ids());
    const Tensor& last = t.h.back();
    const std::size_t n = last.rows(), d = last.cols();
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += last.at(i, j);
        CHECK(t.embedding.at(j) == doctest::Approx(s / n).epsilon(1e-15));
    }
}

TEST_CASE("PAD positions are excluded from the pooled embedding") {
    const EncoderWeights w = init_weights(tiny_config());
    std::vector<TokenId> ids = tiny_ids();
    ids.push_back(1); // PAD id
    const ForwardTrace with_pad = forward(w, ids, TokenId{1});
    const Tensor& last = with_pad.h.back();
    const std::size_t d = last.cols();
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < last.rows(); ++i) s += last.at(i, j);
        CHECK(with_pad.embedding.at(j) == doctest::Approx(s / (last.rows() - 1)));
    }
    std::vector<TokenId> all_pad{1, 1};
    CHECK_THROWS_AS(forward(w, all_pad, TokenId{1}), ContractError);
}

TEST_CASE("forward is deterministic and rejects bad input") {
    const EncoderWeights w = init_weights(tiny_config());
    const ForwardTrace a = forward(w, tiny_ids());
    const ForwardTrace b = forward(w, tiny_ids());
    CHECK(a.embedding.data == b.embedding.data);
    CHECK(a.h.back().data == b.h.back().data);
    CHECK_THROWS_AS(forward(w, {}), ContractError);
    CHECK_THROWS_AS(forward(w, {99}), BoundsError);
    CHECK_THROWS_AS(forward(w, std::vector<TokenId>(101, 3)), BoundsError);
}

TEST_CASE("forward_from_onehot with exact one-hots reproduces forward") {
    const EncoderWeights w = init_weights(tiny_config());
    Tape tape;
    Tape::Var oh = tape.leaf(onehot_rows(tiny_ids(), w.cfg.vocab_size));
    const TapedForward tf = forward_from_onehot(w, tape, oh);
    const Tensor direct = embed(w, tiny_ids());
    const Tensor& taped = tape.value(tf.embedding);
    REQUIRE(taped.size() == direct.size());
    for (std::size_t i = 0; i < direct.size(); ++i)
        CHECK(std::abs(taped.data[i] - direct.data[i]) < 1e-12);
}

TEST_CASE("forward_from_onehot validates rows") {
    const EncoderWeights w = init_weights(tiny_config());
    Tensor bad = onehot_rows(tiny_ids(), w.cfg.vocab_size);
    bad.at(0, 0) += 0.5;
    Tape tape;
    CHECK_THROWS_AS(forward_from_onehot(w, tape, tape.leaf(bad)), ContractError);
    Tensor neg = onehot_rows(tiny_ids(), w.cfg.vocab_size);
    neg.at(1, 0) = -0.25;
    neg.at(1, 2) = 0.25; // still sums to 1... with the one-hot at (1,7) present
    Tape tape2;
    CHECK_THROWS_AS(forward_from_onehot(w, tape2, tape2.leaf(neg)), ContractError);
}

TEST_CASE("gradient of squared embedding norm matches finite differences") {
    const EncoderWeights w = init_weights(tiny_config());
    const std::vector<TokenId> ids = tiny_ids();

    // Bypasses the one-hot validation: FD perturbations leave tiny negative
    // entries behind, which the raw taped encoder accepts.
    auto loss_at = [&](const Tensor& oh) {
        Tape tape;
        Tape::Var leaf = tape.leaf(oh);
        auto tw = detail::make_leaves(w, tape);
        auto enc = detail::taped_encoder(w, tape, leaf, tw);
        Tape::Var e = tape.mean_rows(enc.last_hidden);
        return mse(tape.value(e), Tensor::zeros({w.cfg.d_model}));
    };

    Tape tape;
    Tensor oh = onehot_rows(ids, w.cfg.vocab_size);
    Tape::Var leaf = tape.leaf(oh);
    const TapedForward tf = forward_from_onehot(w, tape, leaf);
    Tape::Var loss = tape.mse(tf.embedding, tape.leaf(Tensor::zeros({w.cfg.d_model})));
    tape.backward(loss);
    const Tensor& g = tape.grad(leaf);

    // Perturbing one-hot entries leaves the row-sum contract behind, so
    // finite differences run through the unvalidated taped encoder via a
    // +h/-h pair on the same coordinate.
    const double h = 1e-5;
    Rng pick(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t i = pick.below(oh.shape[0]);
        const std::size_t j = pick.below(oh.shape[1]);
        // Keep the row sum at 1 by borrowing from the active token's entry.
        const std::size_t active = ids[i];
        if (j == active) continue;
        Tensor up = oh, down = oh;
        up.at(i, j) += h;
        up.at(i, active) -= h;
        down.at(i, j) -= h;
        down.at(i, active) += h;
        const double fd = (loss_at(up) - loss_at(down)) / (2 * h);
        const double analytic = g.at(i, j) - g.at(i, active);
        const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-8});
        CHECK(std::abs(analytic - fd) / scale < 1e-4);
    }
}

TEST_CASE("positional embeddings break token-permutation symmetry") {
    const EncoderWeights w = init_weights(tiny_config());
    const Tensor e1 = embed(w, {3, 3, 7});
    const Tensor e2 = embed(w, {3, 7, 3});
    double diff = 0.0;
    for (std::size_t i = 0; i < e1.size(); ++i) diff += std::abs(e1.data[i] - e2.data[i]);
    CHECK(diff > 1e-9);
}

TEST_CASE("weights round-trip bit-exactly") {
    const std::string path = "/tmp/ggpp_weights_test.bin";
    const EncoderWeights w = init_weights(tiny_config());
    save_weights(w, path);
    const EncoderWeights r = load_weights(path);
    CHECK(r.cfg.n_layers == w.cfg.n_layers);
    CHECK(r.tok_emb.data == w.tok_emb.data);
    CHECK(r.pos_emb.data == w.pos_emb.data);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        CHECK(r.layers[l].w_fc.data == w.layers[l].w_fc.data);
        CHECK(r.layers[l].wq[0].data == w.layers[l].wq[0].data);
        CHECK(r.layers[l].ln2_gain.data == w.layers[l].ln2_gain.data);
    }
    std::remove(path.c_str());
}

TEST_CASE("truncated and corrupted weight files are rejected") {
    const std::string path = "/tmp/ggpp_weights_corrupt.bin";
    const EncoderWeights w = init_weights(tiny_config());
    save_weights(w, path);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();

    {
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_weights(path), FormatError);

    bytes[bytes.size() / 2] ^= 0x5a; // flip a payload byte -> checksum mismatch
    {
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_weights(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("warm-up lowers next-token loss on the training texts") {
    EncoderConfig cfg = tiny_config();
    cfg.vocab_size = 64;
    const std::vector<std::string> texts = {
        "alpha beta gamma delta epsilon zeta",
        "alpha beta gamma eta theta iota",
        "kappa beta gamma delta mu nu",
    };
    const Vocabulary vocab = Vocabulary::build(texts, cfg.vocab_size);
    EncoderWeights w = init_weights(cfg);

    auto lm_loss = [&](const EncoderWeights& weights) {
        double total = 0.0;
        for (const std::string& text : texts) {
            const std::vector<TokenId> ids = encode(vocab, text).ids;
            Tape tape;
            auto tw = detail::make_leaves(weights, tape);
            std::vector<TokenId> input(ids.begin(), ids.end() - 1);
            std::vector<std::size_t> targets(ids.begin() + 1, ids.end());
            Tape::Var oh = tape.leaf(onehot_rows(input, weights.cfg.vocab_size));
            auto enc = detail::taped_encoder(weights, tape, oh, tw);
            Tape::Var logits = tape.matmul_nt(enc.last_hidden, tw.tok_emb);
            total += tape.value(tape.cross_entropy(logits, targets)).data[0];
        }
        return total / texts.size();
    };

    const double before = lm_loss(w);
    warmup_lm(w, vocab, texts, {80, 1e-3, 9});
    const double after = lm_loss(w);
    CHECK(after < before);
}

TEST_CASE("alignment warm-up pulls each prompt toward its own passage") {
    EncoderConfig cfg = tiny_config();
    cfg.vocab_size = 64;
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"who owns the red mill", "carla owns the red mill by the river"},
        {"who owns the tall tower", "viktor owns the tall tower in town"},
        {"who owns the old bakery", "mira owns the old bakery on main street"},
        {"who owns the green barn", "stefan owns the green barn near the hill"},
    };
    std::vector<std::string> texts;
    for (const auto& [q, p] : pairs) {
        texts.push_back(q);
        texts.push_back(p);
    }
    const Vocabulary vocab = Vocabulary::build(texts, cfg.vocab_size);
    EncoderWeights w = init_weights(cfg);

    // Fraction of prompts whose own passage has the highest cosine.
    auto accuracy = [&](const EncoderWeights& weights) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const Tensor q = embed(weights, encode(vocab, pairs[i].first).ids);
            std::size_t best = 0;
            double best_cos = -2.0;
            for (std::size_t j = 0; j < pairs.size(); ++j) {
                const double c = cosine(q, embed(weights, encode(vocab, pairs[j].second).ids));
                if (c > best_cos) {
                    best_cos = c;
                    best = j;
                }
            }
            if (best == i) ++correct;
        }
        return static_cast<double>(correct) / pairs.size();
    };

    AlignConfig acfg;
    acfg.steps = 120;
    acfg.batch = 4;
    acfg.seed = 3;
    warmup_align(w, vocab, pairs, acfg);
    CHECK(accuracy(w) == 1.0);

    CHECK_THROWS_AS(warmup_align(w, vocab, {pairs[0]}, acfg), ConfigError);
    AlignConfig bad = acfg;
    bad.temperature = 0.0;
    CHECK_THROWS_AS(warmup_align(w, vocab, pairs, bad), ConfigError);
}
