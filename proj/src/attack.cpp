#include "ggpp/attack.hpp"

#include <algorithm>
#include <cmath>

#include "ggpp/rng.hpp"
#include "ggpp/tape.hpp"

namespace ggpp {

void AttackConfig::validate() const {
    if (prefix_len < 1) throw ConfigError("attack config: prefix_len must be >= 1");
    if (k_cand < 1) throw ConfigError("attack config: k_cand must be >= 1");
    if (subsets_per_epoch < 1) throw ConfigError("attack config: subsets_per_epoch must be >= 1");
    if (retrieval_k < 1) throw ConfigError("attack config: retrieval_k must be >= 1");
    if (lambda < 0.0) throw ConfigError("attack config: lambda must be >= 0");
}

std::vector<TokenImportance> token_importance(const EncoderWeights& w, const Vocabulary& vocab,
                                              const std::string& target_passage) {
    const std::vector<std::string> words = split_words(target_passage);
    if (words.empty()) throw ContractError("token_importance: empty passage");
    const Tensor e = embed(w, encode(vocab, target_passage).ids);
    std::vector<TokenImportance> ranked;
    ranked.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        const Tensor em = embed(w, encode(vocab, mask_at(target_passage, i)).ids);
        ranked.push_back({i, words[i], 1.0 - cosine(e, em)});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const TokenImportance& a, const TokenImportance& b) {
                         return a.distance > b.distance;
                     });
    return ranked;
}

std::vector<TokenId> init_prefix(const Vocabulary& vocab,
                                 const std::vector<TokenImportance>& ranked, std::size_t n) {
    if (n > ranked.size())
        throw ConfigError("init_prefix: prefix length exceeds available tokens");
    std::vector<TokenId> prefix;
    prefix.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        prefix.push_back(vocab.id_of(ranked[i].token));
    return prefix;
}

double loss_sigmoid_mse(const Tensor& e_target, const Tensor& e_orig, const Tensor& e_query,
                        double lambda) {
    return sigmoid(mse(e_target, e_query)) + lambda * (1.0 - sigmoid(mse(e_orig, e_query)));
}

double loss_cosine(const Tensor& e_target, const Tensor& e_orig, const Tensor& e_query,
                   double lambda) {
    return 1.0 - cosine(e_target, e_query) + lambda * cosine(e_orig, e_query);
}

namespace {

// Internal loss selector: the public kinds plus the GCG baseline's bare MSE.
enum class InnerLoss { SigmoidMse, Cosine, MseOnly };

InnerLoss to_inner(LossKind k) {
    return k == LossKind::SigmoidMse ? InnerLoss::SigmoidMse : InnerLoss::Cosine;
}

double eval_inner_loss(InnerLoss kind, const Tensor& e_target, const Tensor& e_orig,
                       const Tensor& e_query, double lambda) {
    switch (kind) {
        case InnerLoss::SigmoidMse: return loss_sigmoid_mse(e_target, e_orig, e_query, lambda);
        case InnerLoss::Cosine: return loss_cosine(e_target, e_orig, e_query, lambda);
        case InnerLoss::MseOnly: return mse(e_target, e_query);
    }
    return 0.0;
}

Tensor inner_prefix_gradient(const EncoderWeights& w, const std::vector<TokenId>& prefix,
                             const std::vector<TokenId>& context_ids, const Tensor& e_target,
                             const Tensor& e_orig, InnerLoss kind, double lambda) {
    if (prefix.empty()) throw ContractError("prefix_gradient: empty prefix");
    std::vector<TokenId> full = prefix;
    full.insert(full.end(), context_ids.begin(), context_ids.end());

    Tape tape;
    Tape::Var onehot = tape.leaf(onehot_rows(full, w.cfg.vocab_size));
    TapedForward fwd = forward_from_onehot(w, tape, onehot);
    Tape::Var vt = tape.leaf(e_target);
    Tape::Var loss{};
    switch (kind) {
        case InnerLoss::SigmoidMse: {
            Tape::Var vo = tape.leaf(e_orig);
            Tape::Var attract = tape.sigmoid(tape.mse(vt, fwd.embedding));
            Tape::Var repel = tape.affine(tape.sigmoid(tape.mse(vo, fwd.embedding)),
                                          -lambda, lambda); // lambda * (1 - sigmoid)
            loss = tape.add(attract, repel);
            break;
        }
        case InnerLoss::Cosine: {
            Tape::Var vo = tape.leaf(e_orig);
            Tape::Var attract = tape.affine(tape.cosine(vt, fwd.embedding), -1.0, 1.0);
            Tape::Var repel = tape.scale(tape.cosine(vo, fwd.embedding), lambda);
            loss = tape.add(attract, repel);
            break;
        }
        case InnerLoss::MseOnly:
            loss = tape.mse(vt, fwd.embedding);
            break;
    }
    tape.backward(loss);

    const Tensor& g = tape.grad(onehot);
    Tensor out = Tensor::zeros({prefix.size(), w.cfg.vocab_size});
    std::copy(g.data.begin(),
              g.data.begin() + static_cast<std::ptrdiff_t>(prefix.size() * w.cfg.vocab_size),
              out.data.begin());
    return out;
}

std::vector<TokenId> random_prefix(const Vocabulary& vocab, std::size_t n, Rng& rng) {
    std::vector<TokenId> prefix(n);
    const std::size_t lo = Vocabulary::kNumSpecial;
    for (TokenId& t : prefix)
        t = static_cast<TokenId>(lo + rng.below(vocab.size() - lo));
    return prefix;
}

enum class SearchVariant { Ggpp, Gcg, Uat };

AttackOutcome run_search(const RagStore& store, const PassageRecord& query_record,
                         std::uint64_t target_id, std::uint64_t original_id,
                         const AttackConfig& cfg, const AttackOptions& opts,
                         SearchVariant variant) {
    cfg.validate();
    if (target_id == original_id)
        throw ContractError("attack: target and original must differ");
    if (!store.records.count(target_id) || !store.records.count(original_id))
        throw NotFoundError("attack: target or original passage not in store");
    // §5-style filtering: the unperturbed query must retrieve its passage.
    if (!retrieve(store, query_record.prompt_text, cfg.retrieval_k).contains(original_id))
        throw ContractError("attack: query does not retrieve its passage unperturbed");

    const EncoderWeights& w = store.weights;
    const InnerLoss kind =
        variant == SearchVariant::Gcg ? InnerLoss::MseOnly : to_inner(cfg.loss_kind);

    std::vector<TokenId> context = opts.instruction_ids;
    {
        const auto q = encode(store.vocab, query_record.prompt_text).ids;
        context.insert(context.end(), q.begin(), q.end());
    }
    const Tensor e_target = store.embed_text(store.records.at(target_id).passage_text);
    const Tensor e_orig = store.embed_text(store.records.at(original_id).passage_text);

    Rng rng(cfg.seed);
    std::vector<TokenId> prefix;
    if (variant == SearchVariant::Ggpp && opts.init == PrefixInit::TokenImportance) {
        auto ranked = token_importance(w, store.vocab, store.records.at(target_id).passage_text);
        const std::size_t avail = std::min(cfg.prefix_len, ranked.size());
        prefix = init_prefix(store.vocab, ranked, avail);
        // Passages shorter than the prefix cycle their top tokens.
        while (prefix.size() < cfg.prefix_len)
            prefix.push_back(prefix[prefix.size() % avail]);
    } else {
        prefix = random_prefix(store.vocab, cfg.prefix_len, rng);
    }

    auto eval = [&](const std::vector<TokenId>& p) {
        std::vector<TokenId> full = p;
        full.insert(full.end(), context.begin(), context.end());
        Tensor e_u = embed(w, full);
        double loss = eval_inner_loss(kind, e_target, e_orig, e_u, cfg.lambda);
        return std::pair<double, Tensor>(loss, std::move(e_u));
    };

    auto [best_loss, best_eu] = eval(prefix);

    AttackOutcome outcome;
    outcome.initial_distance = l2_distance(best_eu, e_target);

    const std::size_t n = prefix.size();
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const Tensor grad =
            inner_prefix_gradient(w, prefix, context, e_target, e_orig, kind, cfg.lambda);

        if (variant == SearchVariant::Uat) {
            // Round-robin position; linearized scoring over the whole
            // vocabulary, then greedy acceptance on the true loss.
            const std::size_t pos = (epoch - 1) % n;
            TokenId best_tok = prefix[pos];
            double best_score = grad.at(pos, prefix[pos]);
            for (TokenId t = Vocabulary::kNumSpecial; t < w.cfg.vocab_size; ++t) {
                const double s = grad.at(pos, t);
                if (s < best_score) {
                    best_score = s;
                    best_tok = t;
                }
            }
            if (best_tok != prefix[pos]) {
                std::vector<TokenId> trial = prefix;
                trial[pos] = best_tok;
                auto [l, eu] = eval(trial);
                if (l < best_loss) {
                    prefix = std::move(trial);
                    best_loss = l;
                    best_eu = std::move(eu);
                }
            }
        } else {
            const auto cands = candidate_tokens(grad, cfg.k_cand);
            for (std::size_t b = 0; b < cfg.subsets_per_epoch; ++b) {
                const std::size_t pos = rng.below(n);
                const auto& list = cands[pos];
                const TokenId tok = list[rng.below(list.size())];
                if (tok == prefix[pos]) continue;
                std::vector<TokenId> trial = prefix;
                trial[pos] = tok;
                auto [l, eu] = eval(trial);
                if (l < best_loss) {
                    prefix = std::move(trial);
                    best_loss = l;
                    best_eu = std::move(eu);
                }
            }
        }

        outcome.loss_trace.push_back(best_loss);
        outcome.distance_history.push_back(l2_distance(best_eu, e_target));
        outcome.epochs = epoch;

        if (!opts.run_full_budget) {
            const RetrievalResult res = retrieve_embedding(store, best_eu, cfg.retrieval_k);
            if (res.contains(target_id) && !res.contains(original_id)) break;
        }
    }

    const RetrievalResult final_res = retrieve_embedding(store, best_eu, cfg.retrieval_k);
    if (const std::size_t r = final_res.rank_of(target_id)) outcome.target_rank = r;
    if (const std::size_t r = final_res.rank_of(original_id)) outcome.original_rank = r;
    outcome.converged = outcome.target_rank.has_value() && !outcome.original_rank.has_value();
    outcome.prefix = prefix;
    return outcome;
}

} // namespace

Tensor prefix_gradient(const EncoderWeights& w, const std::vector<TokenId>& prefix,
                       const std::vector<TokenId>& context_ids, const Tensor& e_target,
                       const Tensor& e_orig, LossKind kind, double lambda) {
    return inner_prefix_gradient(w, prefix, context_ids, e_target, e_orig, to_inner(kind),
                                 lambda);
}

std::vector<std::vector<TokenId>> candidate_tokens(const Tensor& grad, std::size_t k_cand,
                                                   std::size_t num_special) {
    if (grad.shape.size() != 2) throw DimensionError("candidate_tokens: matrix expected");
    const std::size_t n = grad.shape[0], vocab = grad.shape[1];
    if (vocab <= num_special) throw ContractError("candidate_tokens: no selectable tokens");
    const std::size_t take = std::min(k_cand, vocab - num_special);
    std::vector<std::vector<TokenId>> out(n);
    std::vector<std::pair<double, TokenId>> scored;
    for (std::size_t i = 0; i < n; ++i) {
        scored.clear();
        scored.reserve(vocab - num_special);
        for (std::size_t t = num_special; t < vocab; ++t)
            scored.emplace_back(grad.at(i, t), static_cast<TokenId>(t));
        // Largest -grad first, i.e. smallest gradient; ties by ascending id.
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                          scored.end());
        out[i].reserve(take);
        for (std::size_t j = 0; j < take; ++j) out[i].push_back(scored[j].second);
    }
    return out;
}

AttackOutcome ggpp_optimize(const RagStore& store, const PassageRecord& query_record,
                            std::uint64_t target_id, std::uint64_t original_id,
                            const AttackConfig& cfg, const AttackOptions& opts) {
    return run_search(store, query_record, target_id, original_id, cfg, opts,
                      SearchVariant::Ggpp);
}

AttackOutcome with_instruction(const std::string& instruction_text, const RagStore& store,
                               const PassageRecord& query_record, std::uint64_t target_id,
                               std::uint64_t original_id, const AttackConfig& cfg) {
    AttackOptions opts;
    opts.instruction_ids = encode(store.vocab, instruction_text).ids;
    return run_search(store, query_record, target_id, original_id, cfg, opts,
                      SearchVariant::Ggpp);
}

AttackOutcome gcg_adapted(const RagStore& store, const PassageRecord& query_record,
                          std::uint64_t target_id, std::uint64_t original_id,
                          const AttackConfig& cfg) {
    return run_search(store, query_record, target_id, original_id, cfg, {},
                      SearchVariant::Gcg);
}

AttackOutcome uat_adapted(const RagStore& store, const PassageRecord& query_record,
                          std::uint64_t target_id, std::uint64_t original_id,
                          const AttackConfig& cfg) {
    return run_search(store, query_record, target_id, original_id, cfg, {},
                      SearchVariant::Uat);
}

SuccessRates success_rates(const std::vector<AttackOutcome>& outcomes, std::size_t k) {
    if (outcomes.empty()) throw ContractError("success_rates: no outcomes");
    std::size_t top1 = 0, topk = 0;
    for (const AttackOutcome& o : outcomes) {
        if (o.target_rank && *o.target_rank == 1) ++top1;
        if (o.target_rank && *o.target_rank <= k) ++topk;
    }
    const double total = static_cast<double>(outcomes.size());
    return SuccessRates{static_cast<double>(top1) / total, static_cast<double>(topk) / total};
}

bool verify_converged(const RagStore& store, const AttackOutcome& outcome,
                      const PassageRecord& query_record, std::uint64_t target_id,
                      std::uint64_t original_id, std::size_t k,
                      const std::vector<TokenId>& instruction_ids) {
    std::vector<TokenId> full = outcome.prefix;
    full.insert(full.end(), instruction_ids.begin(), instruction_ids.end());
    const auto q = encode(store.vocab, query_record.prompt_text).ids;
    full.insert(full.end(), q.begin(), q.end());
    const RetrievalResult res = retrieve_embedding(store, store.embed_ids(full), k);
    return res.contains(target_id) && !res.contains(original_id);
}

} // namespace ggpp
