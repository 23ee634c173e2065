#include "ggpp/encoder.hpp"

#include <cmath>

#include "ggpp/io.hpp"
#include "ggpp/kernels.hpp"
#include "ggpp/rng.hpp"

namespace ggpp {

namespace {

constexpr char kWeightsMagic[] = "GGPPWT01";
constexpr double kMaskNegInf = -1e30;

Tensor gaussian(Rng& rng, std::vector<std::size_t> shape, double stddev) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.normal() * stddev;
    return t;
}

Tensor ones(std::size_t n) {
    Tensor t = Tensor::zeros({n});
    for (double& v : t.data) v = 1.0;
    return t;
}

// Additive attention mask: 0 on allowed pairs, -1e30 on j > i when causal.
Tensor attention_mask(std::size_t n, bool causal) {
    Tensor m = Tensor::zeros({n, n});
    if (causal)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                m.at(i, j) = kMaskNegInf;
    return m;
}

} // namespace

void EncoderConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1 || vocab_size < 1)
        throw ConfigError("encoder config: all counts must be >= 1");
    if (d_model % n_heads != 0)
        throw ConfigError("encoder config: d_model must be divisible by n_heads");
    if (max_seq < kDetectionPadLen)
        throw ConfigError("encoder config: max_seq must cover the detection padding length");
}

EncoderWeights init_weights(const EncoderConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    EncoderWeights w;
    w.cfg = cfg;
    w.tok_emb = gaussian(rng, {cfg.vocab_size, cfg.d_model}, s);
    w.pos_emb = gaussian(rng, {cfg.max_seq, cfg.d_model}, s);
    const std::size_t dh = cfg.head_dim();
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        LayerWeights lw;
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            lw.wq.push_back(gaussian(rng, {cfg.d_model, dh}, s));
            lw.wk.push_back(gaussian(rng, {cfg.d_model, dh}, s));
            lw.wv.push_back(gaussian(rng, {cfg.d_model, dh}, s));
            lw.wo.push_back(gaussian(rng, {dh, cfg.d_model}, s));
        }
        lw.w_fc = gaussian(rng, {cfg.d_model, cfg.d_ff}, s);
        lw.w_proj = gaussian(rng, {cfg.d_ff, cfg.d_model}, s);
        lw.ln1_gain = ones(cfg.d_model);
        lw.ln1_bias = Tensor::zeros({cfg.d_model});
        lw.ln2_gain = ones(cfg.d_model);
        lw.ln2_bias = Tensor::zeros({cfg.d_model});
        w.layers.push_back(std::move(lw));
    }
    return w;
}

ForwardTrace forward(const EncoderWeights& w, const std::vector<TokenId>& ids,
                     std::optional<TokenId> pad_id) {
    const EncoderConfig& cfg = w.cfg;
    const std::size_t n = ids.size();
    if (n == 0) throw ContractError("forward: empty token sequence");
    if (n > cfg.max_seq) throw BoundsError("forward: sequence exceeds max_seq");
    for (TokenId id : ids)
        if (id >= cfg.vocab_size) throw BoundsError("forward: token id out of vocabulary");

    ForwardTrace trace;
    Tensor x = Tensor::zeros({n, cfg.d_model});
    for (std::size_t i = 0; i < n; ++i) {
        kernels::add(w.tok_emb.row(ids[i]), w.pos_emb.row(i), x.row(i), cfg.d_model);
    }
    trace.h.push_back(x);

    const double att_scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
    const Tensor mask = attention_mask(n, cfg.causal);

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const LayerWeights& lw = w.layers[l];
        const Tensor& h_prev = trace.h.back();
        const Tensor xn = layer_norm_rows(h_prev, lw.ln1_gain, lw.ln1_bias, kLayerNormEps);

        Tensor attn_out = Tensor::zeros({n, cfg.d_model});
        std::vector<Tensor> head_attn;
        for (std::size_t hd = 0; hd < cfg.n_heads; ++hd) {
            const Tensor q = matmul(xn, lw.wq[hd]);
            const Tensor k = matmul(xn, lw.wk[hd]);
            const Tensor v = matmul(xn, lw.wv[hd]);
            Tensor scores = matmul_nt(q, k);
            kernels::scale(att_scale, scores.data.data(), scores.size());
            kernels::add(scores.data.data(), mask.data.data(), scores.data.data(), scores.size());
            Tensor a = softmax_rows(scores);
            const Tensor ctx = matmul(a, v);
            const Tensor proj = matmul(ctx, lw.wo[hd]);
            kernels::add(attn_out.data.data(), proj.data.data(), attn_out.data.data(),
                         attn_out.size());
            head_attn.push_back(std::move(a));
        }

        Tensor pre_mlp = add(h_prev, attn_out);
        const Tensor xn2 = layer_norm_rows(pre_mlp, lw.ln2_gain, lw.ln2_bias, kLayerNormEps);
        const Tensor mlp_out = matmul(gelu(matmul(xn2, lw.w_fc)), lw.w_proj);

        Tensor h_new = add(pre_mlp, mlp_out);
        trace.attn_out.push_back(std::move(attn_out));
        trace.mlp_out.push_back(mlp_out);
        trace.attn.push_back(std::move(head_attn));
        trace.h.push_back(std::move(h_new));
    }

    // Mean-pooled embedding over non-PAD positions.
    const Tensor& last = trace.h.back();
    Tensor e = Tensor::zeros({cfg.d_model});
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (pad_id && ids[i] == *pad_id) continue;
        kernels::axpy(1.0, last.row(i), e.data.data(), cfg.d_model);
        ++count;
    }
    if (count == 0) throw ContractError("forward: all positions are PAD");
    kernels::scale(1.0 / static_cast<double>(count), e.data.data(), cfg.d_model);
    trace.embedding = std::move(e);
    return trace;
}

Tensor embed(const EncoderWeights& w, const std::vector<TokenId>& ids,
             std::optional<TokenId> pad_id) {
    return forward(w, ids, pad_id).embedding;
}

Tensor onehot_rows(const std::vector<TokenId>& ids, std::size_t vocab_size) {
    Tensor t = Tensor::zeros({ids.size(), vocab_size});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= vocab_size) throw BoundsError("onehot_rows: token id out of range");
        t.at(i, ids[i]) = 1.0;
    }
    return t;
}

namespace detail {

TapedWeights make_leaves(const EncoderWeights& w, Tape& tape) {
    TapedWeights tw;
    tw.tok_emb = tape.leaf(w.tok_emb);
    tw.pos_emb = tape.leaf(w.pos_emb);
    for (const LayerWeights& lw : w.layers) {
        TapedWeights::Layer tl;
        for (std::size_t h = 0; h < lw.wq.size(); ++h) {
            tl.wq.push_back(tape.leaf(lw.wq[h]));
            tl.wk.push_back(tape.leaf(lw.wk[h]));
            tl.wv.push_back(tape.leaf(lw.wv[h]));
            tl.wo.push_back(tape.leaf(lw.wo[h]));
        }
        tl.w_fc = tape.leaf(lw.w_fc);
        tl.w_proj = tape.leaf(lw.w_proj);
        tl.ln1_gain = tape.leaf(lw.ln1_gain);
        tl.ln1_bias = tape.leaf(lw.ln1_bias);
        tl.ln2_gain = tape.leaf(lw.ln2_gain);
        tl.ln2_bias = tape.leaf(lw.ln2_bias);
        tw.layers.push_back(std::move(tl));
    }
    return tw;
}

TapedEncoderOut taped_encoder(const EncoderWeights& w, Tape& tape, Tape::Var onehot,
                              const TapedWeights& tw) {
    const EncoderConfig& cfg = w.cfg;
    const Tensor& oh = tape.value(onehot);
    if (oh.shape.size() != 2 || oh.shape[1] != cfg.vocab_size)
        throw DimensionError("taped encoder: one-hot matrix of width vocab_size expected");
    const std::size_t n = oh.shape[0];
    if (n == 0) throw ContractError("taped encoder: empty input");
    if (n > cfg.max_seq) throw BoundsError("taped encoder: sequence exceeds max_seq");

    Tape::Var x = tape.add_first_rows(tape.matmul(onehot, tw.tok_emb), tw.pos_emb);
    std::vector<Tape::Var> hidden{x};

    const double att_scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
    Tape::Var mask = tape.leaf(attention_mask(n, cfg.causal));

    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const auto& tl = tw.layers[l];
        Tape::Var h_prev = hidden.back();
        Tape::Var xn = tape.layer_norm_rows(h_prev, tl.ln1_gain, tl.ln1_bias, kLayerNormEps);

        Tape::Var attn_sum{};
        bool first = true;
        for (std::size_t hd = 0; hd < cfg.n_heads; ++hd) {
            Tape::Var q = tape.matmul(xn, tl.wq[hd]);
            Tape::Var k = tape.matmul(xn, tl.wk[hd]);
            Tape::Var v = tape.matmul(xn, tl.wv[hd]);
            Tape::Var scores = tape.add(tape.scale(tape.matmul_nt(q, k), att_scale), mask);
            Tape::Var a = tape.softmax_rows(scores);
            Tape::Var proj = tape.matmul(tape.matmul(a, v), tl.wo[hd]);
            attn_sum = first ? proj : tape.add(attn_sum, proj);
            first = false;
        }

        Tape::Var pre_mlp = tape.add(h_prev, attn_sum);
        Tape::Var xn2 = tape.layer_norm_rows(pre_mlp, tl.ln2_gain, tl.ln2_bias, kLayerNormEps);
        Tape::Var mlp = tape.matmul(tape.gelu(tape.matmul(xn2, tl.w_fc)), tl.w_proj);
        hidden.push_back(tape.add(pre_mlp, mlp));
    }
    return TapedEncoderOut{hidden.back(), std::move(hidden)};
}

} // namespace detail

TapedForward forward_from_onehot(const EncoderWeights& w, Tape& tape, Tape::Var onehot) {
    const Tensor& oh = tape.value(onehot);
    if (oh.shape.size() != 2)
        throw DimensionError("forward_from_onehot: matrix expected");
    for (std::size_t i = 0; i < oh.shape[0]; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < oh.shape[1]; ++j) {
            const double v = oh.at(i, j);
            if (v < 0.0) throw ContractError("forward_from_onehot: negative entry in row");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9)
            throw ContractError("forward_from_onehot: row does not sum to 1");
    }
    auto tw = detail::make_leaves(w, tape);
    auto out = detail::taped_encoder(w, tape, onehot, tw);
    TapedForward tf;
    tf.embedding = tape.mean_rows(out.last_hidden);
    tf.hidden = std::move(out.hidden);
    return tf;
}

void save_weights(const EncoderWeights& w, const std::string& path) {
    io::Writer out(path);
    out.bytes(kWeightsMagic, 8);
    const EncoderConfig& c = w.cfg;
    out.u64(c.n_layers);
    out.u64(c.n_heads);
    out.u64(c.d_model);
    out.u64(c.d_ff);
    out.u64(c.max_seq);
    out.u64(c.vocab_size);
    out.u64(c.seed);
    out.u64(c.causal ? 1 : 0);
    out.f64_array(w.tok_emb.data);
    out.f64_array(w.pos_emb.data);
    for (const LayerWeights& lw : w.layers) {
        for (const auto& t : lw.wq) out.f64_array(t.data);
        for (const auto& t : lw.wk) out.f64_array(t.data);
        for (const auto& t : lw.wv) out.f64_array(t.data);
        for (const auto& t : lw.wo) out.f64_array(t.data);
        out.f64_array(lw.w_fc.data);
        out.f64_array(lw.w_proj.data);
        out.f64_array(lw.ln1_gain.data);
        out.f64_array(lw.ln1_bias.data);
        out.f64_array(lw.ln2_gain.data);
        out.f64_array(lw.ln2_bias.data);
    }
    out.finish();
}

EncoderWeights load_weights(const std::string& path) {
    io::Reader in(path);
    char magic[8];
    in.bytes(magic, 8);
    if (std::string(magic, 8) != kWeightsMagic)
        throw FormatError("weight file: bad magic");
    EncoderConfig c;
    c.n_layers = in.u64();
    c.n_heads = in.u64();
    c.d_model = in.u64();
    c.d_ff = in.u64();
    c.max_seq = in.u64();
    c.vocab_size = in.u64();
    c.seed = in.u64();
    c.causal = in.u64() != 0;
    c.validate();

    auto read_tensor = [&in](std::vector<std::size_t> shape) {
        std::vector<double> data = in.f64_array();
        std::size_t expect = 1;
        for (auto d : shape) expect *= d;
        if (data.size() != expect)
            throw FormatError("weight file: tensor size mismatch");
        return Tensor{std::move(shape), std::move(data)};
    };

    EncoderWeights w;
    w.cfg = c;
    w.tok_emb = read_tensor({c.vocab_size, c.d_model});
    w.pos_emb = read_tensor({c.max_seq, c.d_model});
    const std::size_t dh = c.head_dim();
    for (std::size_t l = 0; l < c.n_layers; ++l) {
        LayerWeights lw;
        for (std::size_t h = 0; h < c.n_heads; ++h) lw.wq.push_back(read_tensor({c.d_model, dh}));
        for (std::size_t h = 0; h < c.n_heads; ++h) lw.wk.push_back(read_tensor({c.d_model, dh}));
        for (std::size_t h = 0; h < c.n_heads; ++h) lw.wv.push_back(read_tensor({c.d_model, dh}));
        for (std::size_t h = 0; h < c.n_heads; ++h) lw.wo.push_back(read_tensor({dh, c.d_model}));
        lw.w_fc = read_tensor({c.d_model, c.d_ff});
        lw.w_proj = read_tensor({c.d_ff, c.d_model});
        lw.ln1_gain = read_tensor({c.d_model});
        lw.ln1_bias = read_tensor({c.d_model});
        lw.ln2_gain = read_tensor({c.d_model});
        lw.ln2_bias = read_tensor({c.d_model});
        w.layers.push_back(std::move(lw));
    }
    in.finish();
    return w;
}

namespace {

struct AdamState {
    std::vector<double> m, v;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(Tensor& param, const Tensor& grad, AdamState& st, double lr, std::size_t t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad.data[i];
        st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
        st.v[i] = b2 * st.v[i] + (1.0 - b2) * g * g;
        param.data[i] -= lr * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + eps);
    }
}

std::vector<Tensor*> collect_params(EncoderWeights& w) {
    std::vector<Tensor*> params{&w.tok_emb, &w.pos_emb};
    for (LayerWeights& lw : w.layers) {
        for (auto& t : lw.wq) params.push_back(&t);
        for (auto& t : lw.wk) params.push_back(&t);
        for (auto& t : lw.wv) params.push_back(&t);
        for (auto& t : lw.wo) params.push_back(&t);
        params.push_back(&lw.w_fc);
        params.push_back(&lw.w_proj);
        params.push_back(&lw.ln1_gain);
        params.push_back(&lw.ln1_bias);
        params.push_back(&lw.ln2_gain);
        params.push_back(&lw.ln2_bias);
    }
    return params;
}

// Leaf order matches collect_params.
std::vector<Tape::Var> collect_leaves(const detail::TapedWeights& tw) {
    std::vector<Tape::Var> leaves;
    leaves.push_back(tw.tok_emb);
    leaves.push_back(tw.pos_emb);
    for (const auto& tl : tw.layers) {
        for (auto vref : tl.wq) leaves.push_back(vref);
        for (auto vref : tl.wk) leaves.push_back(vref);
        for (auto vref : tl.wv) leaves.push_back(vref);
        for (auto vref : tl.wo) leaves.push_back(vref);
        leaves.push_back(tl.w_fc);
        leaves.push_back(tl.w_proj);
        leaves.push_back(tl.ln1_gain);
        leaves.push_back(tl.ln1_bias);
        leaves.push_back(tl.ln2_gain);
        leaves.push_back(tl.ln2_bias);
    }
    return leaves;
}

} // namespace

void warmup_lm(EncoderWeights& w, const Vocabulary& vocab,
               const std::vector<std::string>& texts, const WarmupConfig& cfg) {
    if (texts.empty()) throw ConfigError("warmup: no texts");
    Rng rng(cfg.seed);

    std::vector<Tensor*> params = collect_params(w);
    std::vector<AdamState> states;
    states.reserve(params.size());
    for (Tensor* p : params) states.emplace_back(p->size());

    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const std::string& text = texts[rng.below(texts.size())];
        std::vector<TokenId> ids = encode(vocab, text).ids;
        if (ids.size() > w.cfg.max_seq) ids.resize(w.cfg.max_seq);
        if (ids.size() < 2) continue;

        Tape tape;
        auto tw = detail::make_leaves(w, tape);
        // Input: all but the last token; target: the next token per position.
        std::vector<TokenId> input(ids.begin(), ids.end() - 1);
        std::vector<std::size_t> targets(ids.begin() + 1, ids.end());
        Tape::Var onehot = tape.leaf(onehot_rows(input, w.cfg.vocab_size));
        auto enc = detail::taped_encoder(w, tape, onehot, tw);
        // Weight-tied output head: logits = h_last * tok_emb^T.
        Tape::Var logits = tape.matmul_nt(enc.last_hidden, tw.tok_emb);
        Tape::Var loss = tape.cross_entropy(logits, targets);
        tape.backward(loss);

        const std::vector<Tape::Var> leaves = collect_leaves(tw);
        for (std::size_t p = 0; p < params.size(); ++p)
            adam_step(*params[p], tape.grad(leaves[p]), states[p], cfg.learning_rate, step);
    }
}

void warmup_align(EncoderWeights& w, const Vocabulary& vocab,
                  const std::vector<std::pair<std::string, std::string>>& pairs,
                  const AlignConfig& cfg) {
    if (pairs.size() < 2) throw ConfigError("warmup_align: need at least two pairs");
    if (cfg.batch < 2) throw ConfigError("warmup_align: batch must be at least 2");
    if (cfg.temperature <= 0.0) throw ConfigError("warmup_align: temperature must be positive");
    Rng rng(cfg.seed);

    std::vector<Tensor*> params = collect_params(w);
    std::vector<AdamState> states;
    states.reserve(params.size());
    for (Tensor* p : params) states.emplace_back(p->size());

    const std::size_t batch = std::min(cfg.batch, pairs.size());
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        // Sample the batch without replacement.
        for (std::size_t i = 0; i < batch; ++i)
            std::swap(order[i], order[i + rng.below(order.size() - i)]);

        Tape tape;
        auto tw = detail::make_leaves(w, tape);
        auto embed_one = [&](const std::string& text) {
            std::vector<TokenId> ids = encode(vocab, text).ids;
            if (ids.size() > w.cfg.max_seq) ids.resize(w.cfg.max_seq);
            Tape::Var onehot = tape.leaf(onehot_rows(ids, w.cfg.vocab_size));
            return tape.mean_rows(detail::taped_encoder(w, tape, onehot, tw).last_hidden);
        };
        std::vector<Tape::Var> prompts, passages;
        std::vector<std::size_t> targets;
        for (std::size_t i = 0; i < batch; ++i) {
            prompts.push_back(embed_one(pairs[order[i]].first));
            passages.push_back(embed_one(pairs[order[i]].second));
            targets.push_back(i);
        }
        Tape::Var pn = tape.normalize_rows(tape.concat_rows(prompts));
        Tape::Var dn = tape.normalize_rows(tape.concat_rows(passages));
        const double inv_t = 1.0 / cfg.temperature;
        Tape::Var loss = tape.scale(
            tape.add(tape.cross_entropy(tape.scale(tape.matmul_nt(pn, dn), inv_t), targets),
                     tape.cross_entropy(tape.scale(tape.matmul_nt(dn, pn), inv_t), targets)),
            0.5);
        tape.backward(loss);

        const std::vector<Tape::Var> leaves = collect_leaves(tw);
        for (std::size_t p = 0; p < params.size(); ++p)
            adam_step(*params[p], tape.grad(leaves[p]), states[p], cfg.learning_rate, step);
    }
}

} // namespace ggpp
