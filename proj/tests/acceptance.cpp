// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria mix exact property checks with directional comparisons
// on seeded benchmarks; every run is deterministic under the seeds below.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "ggpp/harness.hpp"
#include "ggpp/rng.hpp"

using namespace ggpp;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s  criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", id, name.c_str(),
                detail.empty() ? "" : " -- ", detail.c_str());
    if (!ok) ++failures;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.normal();
    return t;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- criterion 1

using LossBuilder = std::function<Tape::Var(Tape&, const std::vector<Tape::Var>&)>;

double eval_loss(const std::vector<Tensor>& inputs, const LossBuilder& build) {
    Tape tape;
    std::vector<Tape::Var> leaves;
    for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
    return tape.value(build(tape, leaves)).data[0];
}

// Central finite differences (h=1e-5) over every coordinate of every input;
// returns the worst relative error.
double fd_worst(std::vector<Tensor> inputs, const LossBuilder& build) {
    Tape tape;
    std::vector<Tape::Var> leaves;
    for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
    tape.backward(build(tape, leaves));

    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        const Tensor g = tape.grad(leaves[t]);
        for (std::size_t i = 0; i < inputs[t].size(); ++i) {
            const double orig = inputs[t].data[i];
            inputs[t].data[i] = orig + h;
            const double up = eval_loss(inputs, build);
            inputs[t].data[i] = orig - h;
            const double down = eval_loss(inputs, build);
            inputs[t].data[i] = orig;
            const double fd = (up - down) / (2 * h);
            const double scale = std::max({std::abs(fd), std::abs(g.data[i]), 1e-6});
            worst = std::max(worst, std::abs(g.data[i] - fd) / scale);
        }
    }
    return worst;
}

Tape::Var to_scalar(Tape& tape, Tape::Var x, std::uint64_t seed) {
    Rng rng(seed);
    Tensor target = random_tensor(tape.value(x).shape, rng);
    return tape.mse(x, tape.leaf(target));
}

double op_instance(std::size_t which, std::uint64_t seed) {
    Rng rng(seed);
    auto scalarize = [seed](Tape& t, Tape::Var v) { return to_scalar(t, v, seed ^ 0x5bd1); };
    switch (which % 16) {
        case 0:
            return fd_worst({random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.matmul(v[0], v[1]));
                            });
        case 1:
            return fd_worst({random_tensor({3, 5}, rng), random_tensor({2, 5}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.matmul_nt(v[0], v[1]));
                            });
        case 2:
            return fd_worst({random_tensor({4, 3}, rng), random_tensor({4, 3}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.add(v[0], v[1]));
                            });
        case 3:
            return fd_worst({random_tensor({2, 6}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.scale(v[0], -1.7));
                            });
        case 4:
            return fd_worst({random_tensor({2, 6}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.affine(v[0], 0.4, 2.5));
                            });
        case 5:
            return fd_worst({random_tensor({3, 5}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.softmax_rows(v[0]));
                            });
        case 6:
            return fd_worst({random_tensor({3, 8}, rng), random_tensor({8}, rng),
                             random_tensor({8}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.layer_norm_rows(v[0], v[1], v[2], 1e-5));
                            });
        case 7:
            return fd_worst({random_tensor({4, 4}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.gelu(v[0]));
                            });
        case 8:
            return fd_worst({random_tensor({5, 3}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.mean_rows(v[0]));
                            });
        case 9:
            return fd_worst({random_tensor({6}, rng), random_tensor({6}, rng)},
                            [](Tape& t, const std::vector<Tape::Var>& v) {
                                return t.mse(v[0], v[1]);
                            });
        case 10:
            return fd_worst({random_tensor({7}, rng), random_tensor({7}, rng)},
                            [](Tape& t, const std::vector<Tape::Var>& v) {
                                return t.cosine(v[0], v[1]);
                            });
        case 11:
            return fd_worst({random_tensor({3, 3}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.sigmoid(v[0]));
                            });
        case 12:
            return fd_worst({random_tensor({3, 4}, rng), random_tensor({6, 4}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.add_first_rows(v[0], v[1]));
                            });
        case 13:
            return fd_worst({random_tensor({3, 5}, rng)},
                            [](Tape& t, const std::vector<Tape::Var>& v) {
                                return t.cross_entropy(v[0], {2, 0, 3});
                            });
        case 14:
            return fd_worst({random_tensor({4}, rng), random_tensor({4}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.concat_rows({v[0], v[1]}));
                            });
        default:
            return fd_worst({random_tensor({3, 5}, rng)},
                            [&](Tape& t, const std::vector<Tape::Var>& v) {
                                return scalarize(t, t.normalize_rows(v[0]));
                            });
    }
}

// FD through the encoder for the full attack losses, using +h/-h coordinate
// pairs that preserve the one-hot row sums.
double loss_instance(LossKind kind, std::uint64_t seed) {
    EncoderConfig cfg;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 16;
    cfg.max_seq = 100;
    cfg.vocab_size = 24;
    cfg.seed = seed;
    const EncoderWeights w = init_weights(cfg);

    Rng rng(seed * 31 + 7);
    std::vector<TokenId> prefix, context;
    for (int i = 0; i < 3; ++i)
        prefix.push_back(static_cast<TokenId>(3 + rng.below(cfg.vocab_size - 3)));
    for (int i = 0; i < 5; ++i)
        context.push_back(static_cast<TokenId>(3 + rng.below(cfg.vocab_size - 3)));
    const Tensor e_target = random_tensor({cfg.d_model}, rng);
    const Tensor e_orig = random_tensor({cfg.d_model}, rng);
    const double lambda = 0.8;

    auto loss_at = [&](const Tensor& rows) {
        Tape tape;
        Tape::Var leaf = tape.leaf(rows);
        auto tw = detail::make_leaves(w, tape);
        auto enc = detail::taped_encoder(w, tape, leaf, tw);
        const Tensor e_u = tape.value(tape.mean_rows(enc.last_hidden));
        return kind == LossKind::SigmoidMse ? loss_sigmoid_mse(e_target, e_orig, e_u, lambda)
                                            : loss_cosine(e_target, e_orig, e_u, lambda);
    };

    std::vector<TokenId> full = prefix;
    full.insert(full.end(), context.begin(), context.end());
    const Tensor oh = onehot_rows(full, cfg.vocab_size);
    const Tensor g = prefix_gradient(w, prefix, context, e_target, e_orig, kind, lambda);

    const double h = 1e-5;
    double worst = 0.0;
    Rng pick(seed + 99);
    for (int trial = 0; trial < 12; ++trial) {
        const std::size_t i = pick.below(prefix.size());
        const std::size_t j = pick.below(cfg.vocab_size);
        const std::size_t active = prefix[i];
        if (j == active) continue;
        Tensor up = oh, down = oh;
        up.at(i, j) += h;
        up.at(i, active) -= h;
        down.at(i, j) -= h;
        down.at(i, active) += h;
        const double fd = (loss_at(up) - loss_at(down)) / (2 * h);
        const double analytic = g.at(i, j) - g.at(i, active);
        const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-8});
        worst = std::max(worst, std::abs(analytic - fd) / scale);
    }
    return worst;
}

void criterion_1() {
    double worst = 0.0;
    std::size_t instances = 0;
    for (std::size_t i = 0; i < 80; ++i, ++instances)
        worst = std::max(worst, op_instance(i, 1000 + i));
    for (std::size_t i = 0; i < 10; ++i, ++instances)
        worst = std::max(worst, loss_instance(LossKind::SigmoidMse, 2000 + i));
    for (std::size_t i = 0; i < 10; ++i, ++instances)
        worst = std::max(worst, loss_instance(LossKind::Cosine, 3000 + i));
    char buf[128];
    std::snprintf(buf, sizeof buf, "worst relative error %.3g over %zu instances", worst,
                  instances);
    report(1, "tape gradients match finite differences (h=1e-5, tol 1e-4)",
           worst < 1e-4 && instances == 100, buf);
}

// ---------------------------------------------------------------- criterion 2

void criterion_2(const RagStore& store) {
    const EncoderWeights& w = store.weights;
    Rng rng(77);
    bool ok = true;
    std::string detail;
    for (int rep = 0; rep < 5 && ok; ++rep) {
        std::vector<TokenId> ids;
        const std::size_t n = 5 + rng.below(20);
        for (std::size_t i = 0; i < n; ++i)
            ids.push_back(static_cast<TokenId>(3 + rng.below(w.cfg.vocab_size - 3)));
        const ForwardTrace t = forward(w, ids);

        for (std::size_t l = 0; l < w.cfg.n_layers && ok; ++l)
            for (std::size_t i = 0; i < t.h[l].size(); ++i) {
                const double expect =
                    t.h[l].data[i] + t.attn_out[l].data[i] + t.mlp_out[l].data[i];
                if (std::abs(t.h[l + 1].data[i] - expect) > 1e-9) {
                    ok = false;
                    detail = "residual identity violated";
                    break;
                }
            }
        for (const auto& layer : t.attn)
            for (const Tensor& a : layer)
                for (std::size_t i = 0; i < n && ok; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += a.at(i, j);
                    if (std::abs(s - 1.0) > 1e-9) {
                        ok = false;
                        detail = "attention row sum off";
                    }
                }
        // Independent re-computation of the mean in the same accumulation
        // order; must agree exactly.
        const Tensor& last = t.h.back();
        for (std::size_t j = 0; j < w.cfg.d_model && ok; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += last.at(i, j);
            if (t.embedding.at(j) != s * (1.0 / static_cast<double>(n))) {
                ok = false;
                detail = "embedding is not the exact mean of last hidden states";
            }
        }
    }
    report(2, "architecture identities (residual, attention rows, mean pooling)", ok, detail);
}

// ---------------------------------------------------------------- criterion 3

void criterion_3() {
    const std::size_t n = 1000, dim = 16;
    Rng rng(303);
    std::vector<IndexEntry> entries;
    for (std::size_t i = 0; i < n; ++i)
        entries.push_back({i + 1, random_tensor({dim}, rng)});
    HnswIndex idx(dim, {});
    for (const IndexEntry& e : entries) idx.insert(e);

    bool exact_ok = true;
    for (int q = 0; q < 20 && exact_ok; ++q) {
        const Tensor query = random_tensor({dim}, rng);
        const RetrievalResult a = idx.search_topk(query, 10, n);
        const RetrievalResult b = exhaustive_search(entries, query, 10);
        if (a.hits.size() != b.hits.size()) exact_ok = false;
        for (std::size_t i = 0; exact_ok && i < a.hits.size(); ++i)
            if (a.hits[i].id != b.hits[i].id ||
                std::abs(a.hits[i].distance - b.hits[i].distance) > 1e-12)
                exact_ok = false;
    }

    std::size_t found = 0, total = 0;
    for (int q = 0; q < 50; ++q) {
        const Tensor query = random_tensor({dim}, rng);
        const RetrievalResult approx = idx.search_topk(query, 10); // ef_search = 64
        for (const ScoredId& hit : exhaustive_search(entries, query, 10).hits) {
            ++total;
            if (approx.contains(hit.id)) ++found;
        }
    }
    const double recall = static_cast<double>(found) / static_cast<double>(total);
    char buf[64];
    std::snprintf(buf, sizeof buf, "recall@10 at ef=64: %.3f", recall);
    report(3, "HNSW equals the exhaustive oracle at ef=N; recall@10 >= 0.95 at ef=64",
           exact_ok && recall >= 0.95, buf);
}

// ---------------------------------------------------------------- criterion 4

void criterion_4(const RagStore& store) {
    bool ok = true;
    std::size_t checked = 0;
    for (const auto& [id, rec] : store.records) {
        if (checked == 20) break;
        ++checked;
        const auto ranked = token_importance(store.weights, store.vocab, rec.passage_text);

        // Independent oracle: mask each position, measure 1 - cos, stable
        // sort descending.
        const auto words = split_words(rec.passage_text);
        const Tensor e = store.embed_text(rec.passage_text);
        std::vector<std::pair<double, std::size_t>> oracle;
        for (std::size_t i = 0; i < words.size(); ++i) {
            const Tensor em = store.embed_text(mask_at(rec.passage_text, i));
            oracle.emplace_back(1.0 - cosine(e, em), i);
        }
        std::stable_sort(oracle.begin(), oracle.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });

        if (ranked.size() != oracle.size()) ok = false;
        for (std::size_t i = 0; ok && i < ranked.size(); ++i)
            if (ranked[i].position != oracle[i].second ||
                ranked[i].distance != oracle[i].first || ranked[i].token != words[oracle[i].second])
                ok = false;
        if (!ok) break;
    }
    report(4, "token-importance ranking equals the brute-force oracle on 20 passages", ok,
           "");
}

// ------------------------------------------------------- criteria 5, 9 (data)

std::vector<QueryAttack> attack_batch; // 200 GGPP attacks on the easy store

void criterion_5(const RagStore& store, const RunConfig& cfg) {
    attack_batch = run_attacks(store, cfg, "ggpp", 200);
    std::size_t violations = 0, converged = 0;
    for (const QueryAttack& qa : attack_batch) {
        if (!qa.outcome.converged) continue;
        ++converged;
        if (!verify_converged(store, qa.outcome, store.records.at(qa.query_id), qa.target_id,
                              qa.query_id, cfg.attack.retrieval_k))
            ++violations;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu queries, %zu converged, %zu violations",
                  attack_batch.size(), converged, violations);
    report(5, "every converged attack re-verifies both retrieval clauses",
           attack_batch.size() >= 200 && violations == 0 && converged >= 100, buf);
}

// ---------------------------------------------------------------- criterion 6

void criterion_6(const RagStore& hard_store, RunConfig cfg) {
    // Identical tight budgets keep the benchmark off the ceiling.
    cfg.attack.prefix_len = 2;
    cfg.attack.max_epochs = 5;
    cfg.attack.subsets_per_epoch = 16;
    auto topk = [&](const std::string& variant) {
        const auto attacks = run_attacks(hard_store, cfg, variant, 100);
        std::vector<AttackOutcome> outs;
        for (const QueryAttack& qa : attacks) outs.push_back(qa.outcome);
        return success_rates(outs, cfg.attack.retrieval_k).topk;
    };
    const double ggpp = topk("ggpp"), gcg = topk("gcg"), uat = topk("uat");
    char buf[96];
    std::snprintf(buf, sizeof buf, "top-10 success: GGPP %.2f, GCG %.2f, UAT %.2f", ggpp,
                  gcg, uat);
    report(6, "GGPP strictly beats GCG and UAT at identical budgets (100 queries)",
           ggpp > gcg && ggpp > uat, buf);
}

// ---------------------------------------------------------------- criterion 7

void criterion_7(const RagStore& store, const RunConfig& base) {
    AttackConfig cfg = base.attack;
    cfg.lambda = 0.0;
    cfg.max_epochs = 20;

    std::vector<double> init_start, rand_start;
    std::vector<const AttackOutcome*> keep;
    std::vector<AttackOutcome> runs_init, runs_rand;
    std::size_t lower_starts = 0, seeds = 0;
    for (const auto& [qid, rec] : store.records) {
        if (seeds == 50) break;
        if (!retrieve(store, rec.prompt_text, cfg.retrieval_k).contains(qid)) continue;
        std::uint64_t target = 0;
        for (const auto& [tid, trec] : store.records)
            if (tid != qid && trec.constraint_type == rec.constraint_type) {
                target = tid;
                break;
            }
        if (!target) continue;
        ++seeds;
        cfg.seed = 7000 + seeds;

        AttackOptions opts;
        opts.run_full_budget = true;
        opts.init = PrefixInit::TokenImportance;
        runs_init.push_back(ggpp_optimize(store, rec, target, qid, cfg, opts));
        opts.init = PrefixInit::Random;
        runs_rand.push_back(ggpp_optimize(store, rec, target, qid, cfg, opts));
        if (runs_init.back().initial_distance <= runs_rand.back().initial_distance)
            ++lower_starts;
    }

    // Fixed threshold: median of all final distances across both arms.
    std::vector<double> finals;
    for (const auto& o : runs_init) finals.push_back(o.distance_history.back());
    for (const auto& o : runs_rand) finals.push_back(o.distance_history.back());
    const double thr = median(finals);
    auto epochs_to = [&](const AttackOutcome& o) {
        for (std::size_t e = 0; e < o.distance_history.size(); ++e)
            if (o.distance_history[e] <= thr) return static_cast<double>(e + 1);
        return static_cast<double>(o.distance_history.size() + 1);
    };
    std::vector<double> e_init, e_rand;
    for (const auto& o : runs_init) e_init.push_back(epochs_to(o));
    for (const auto& o : runs_rand) e_rand.push_back(epochs_to(o));
    const double m_init = median(e_init), m_rand = median(e_rand);

    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "lower start %zu/50, median epochs-to-threshold %.1f vs %.1f",
                  lower_starts, m_init, m_rand);
    report(7, "importance init starts closer and converges no slower (lambda=0, 50 seeds)",
           seeds == 50 && lower_starts >= 40 && m_init <= m_rand, buf);
}

// ---------------------------------------------------------------- criterion 8

void criterion_8(const RagStore& hard_store, RunConfig cfg) {
    cfg.attack.prefix_len = 2;
    cfg.attack.max_epochs = 5;
    cfg.attack.subsets_per_epoch = 16;
    auto top1 = [&](double lambda) {
        const auto attacks = run_attacks(hard_store, cfg, "ggpp", 100, lambda);
        std::vector<AttackOutcome> outs;
        for (const QueryAttack& qa : attacks) outs.push_back(qa.outcome);
        return success_rates(outs, cfg.attack.retrieval_k).top1;
    };
    const double s05 = top1(0.5), s10 = top1(1.0), s20 = top1(2.0);
    char buf[96];
    std::snprintf(buf, sizeof buf, "top-1 success: l=0.5 %.2f, l=1.0 %.2f, l=2.0 %.2f", s05,
                  s10, s20);
    report(8, "success at lambda=2.0 does not exceed lambda in {0.5, 1.0}",
           s20 <= s05 && s20 <= s10, buf);
}

// ---------------------------------------------------------------- criterion 9

void criterion_9(const RagStore& store) {
    std::vector<AttackedQuery> successes;
    for (const QueryAttack& qa : attack_batch)
        if (qa.outcome.converged) {
            const PassageRecord& rec = store.records.at(qa.query_id);
            successes.push_back(
                {qa.query_id, qa.outcome.prefix, rec.prompt_text, rec.passage_text});
        }
    if (successes.size() < 100) {
        report(9, "probe detection", false, "fewer than 100 converged attacks available");
        return;
    }

    double auroc_act = 0.0, auroc_sate = 0.0, perm_act = 0.0, perm_sate = 0.0;
    std::size_t params_act = 0, params_sate = 0;
    for (ProbeKind kind : {ProbeKind::Act, ProbeKind::Sate}) {
        std::vector<DetectionMetrics> true_runs, perm_runs;
        for (std::uint64_t s = 0; s < 10; ++s) {
            const ProbeDataset ds = build_dataset(successes, store, kind, 100, s);
            const LogRegModel model = train_logreg(ds);
            true_runs.push_back(evaluate(model, ds));
            (kind == ProbeKind::Act ? params_act : params_sate) = model.param_count();

            // Permutation control: train on shuffled train labels, score
            // against the true test labels.
            ProbeDataset perm = ds;
            Rng shuffle(900 + s);
            for (std::size_t i = 0; i + 1 < perm.train_idx.size(); ++i) {
                const std::size_t j = i + shuffle.below(perm.train_idx.size() - i);
                std::swap(perm.labels[perm.train_idx[i]], perm.labels[perm.train_idx[j]]);
            }
            const LogRegModel pmodel = train_logreg(perm);
            perm_runs.push_back(evaluate(pmodel, ds));
        }
        const double t = average_metrics(true_runs).auroc;
        const double p = average_metrics(perm_runs).auroc;
        (kind == ProbeKind::Act ? auroc_act : auroc_sate) = t;
        (kind == ProbeKind::Act ? perm_act : perm_sate) = p;
    }

    const auto timing = timing_report(successes, store, 100, 3, 0);
    const bool act_faster = timing[0].train_seconds < timing[1].train_seconds &&
                            timing[0].infer_seconds < timing[1].infer_seconds;

    const EncoderConfig& e = store.weights.cfg;
    const bool params_ok =
        params_act == e.d_model * 100 + 1 &&
        params_sate == e.n_layers * e.n_heads * 100 * 100 + 1 && params_act < params_sate;
    const bool perm_ok = perm_act >= 0.3 && perm_act <= 0.7 && perm_sate >= 0.3 &&
                         perm_sate <= 0.7;

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "AUROC ACT %.3f SATe %.3f; permuted %.3f/%.3f; params %zu/%zu; "
                  "train %.3fs/%.3fs",
                  auroc_act, auroc_sate, perm_act, perm_sate, params_act, params_sate,
                  timing[0].train_seconds, timing[1].train_seconds);
    report(9, "ACT and SATe probes detect perturbed queries (10-seed average)",
           auroc_act >= 0.80 && auroc_sate >= 0.80 && perm_ok && params_ok && act_faster,
           buf);
}

// --------------------------------------------------------------- criterion 10

void criterion_10(const RagStore& store, const RunConfig& base) {
    // Same tight budget as the baseline benchmark: on an easy store the
    // instruction disrupts nothing and the comparison is vacuous.
    AttackConfig cfg = base.attack;
    cfg.prefix_len = 2;
    cfg.max_epochs = 5;
    cfg.subsets_per_epoch = 16;
    const std::vector<TokenId> instr = encode(store.vocab, base.instruction_text).ids;

    std::size_t n = 0, plain_ok = 0, instr_trained_ok = 0, plain_under_instr_ok = 0;
    for (const auto& [qid, rec] : store.records) {
        if (n == 50) break;
        if (!retrieve(store, rec.prompt_text, cfg.retrieval_k).contains(qid)) continue;
        std::uint64_t target = 0;
        for (const auto& [tid, trec] : store.records)
            if (tid != qid && trec.constraint_type == rec.constraint_type) {
                target = tid;
                break;
            }
        if (!target) continue;
        ++n;
        cfg.seed = 5000 + n;

        const AttackOutcome plain = ggpp_optimize(store, rec, target, qid, cfg);
        if (plain.converged) {
            ++plain_ok;
            // The same prefix evaluated with the instruction inserted.
            if (verify_converged(store, plain, rec, target, qid, cfg.retrieval_k, instr))
                ++plain_under_instr_ok;
        }
        const AttackOutcome instructed =
            with_instruction(base.instruction_text, store, rec, target, qid, cfg);
        if (instructed.converged) ++instr_trained_ok;
    }

    const double s_plain = static_cast<double>(plain_ok) / 50.0;
    const double s_instr = static_cast<double>(instr_trained_ok) / 50.0;
    const double s_survive = static_cast<double>(plain_under_instr_ok) / 50.0;
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "no-instruction %.2f, instruction-trained %.2f, untrained-under-instruction %.2f",
                  s_plain, s_instr, s_survive);
    report(10, "instruction-aware training recovers >= 50% success (50 queries)",
           n == 50 && s_plain > 0.0 && s_instr >= 0.5 * s_plain && s_survive < s_instr, buf);
}

// --------------------------------------------------------------- criterion 11

void criterion_11(const RunConfig& easy_cfg) {
    namespace fs = std::filesystem;
    bool ok = true;
    std::string detail;

    // Same build command, fresh output directory: reports must match.
    RunConfig other = easy_cfg;
    other.out_dir = easy_cfg.out_dir + "_rebuild";
    fs::remove_all(other.out_dir);
    cmd_build(other);
    if (read_file(easy_cfg.out_dir + "/build.report.tsv") !=
            read_file(other.out_dir + "/build.report.tsv") ||
        read_file(easy_cfg.weights_path()) != read_file(other.weights_path())) {
        ok = false;
        detail = "rebuild differs";
    }
    fs::remove_all(other.out_dir);

    // Attack re-run in place (threaded worker pool must not reorder output).
    RunConfig atk = easy_cfg;
    atk.n_queries = 20;
    const ExperimentReport attack_report = cmd_attack(atk);
    const std::string first = read_file(easy_cfg.out_dir + "/attack.report.tsv");
    const std::string first_attacks = read_file(atk.attacks_path());
    cmd_attack(atk);
    if (ok && (read_file(easy_cfg.out_dir + "/attack.report.tsv") != first ||
               read_file(atk.attacks_path()) != first_attacks)) {
        ok = false;
        detail = "attack re-run differs";
    }

    const auto qid = static_cast<std::uint64_t>(attack_report.rows[0][0]);
    cmd_curve(easy_cfg, qid);
    const std::string curve1 = read_file(easy_cfg.out_dir + "/curve.report.tsv");
    cmd_curve(easy_cfg, qid);
    if (ok && read_file(easy_cfg.out_dir + "/curve.report.tsv") != curve1) {
        ok = false;
        detail = "curve re-run differs";
    }
    report(11, "re-runs with the same seed reproduce reports byte-identically", ok, detail);
}

} // namespace

int main() {
    namespace fs = std::filesystem;
    const std::string root = "/tmp/ggpp_acceptance";
    fs::remove_all(root);

    RunConfig easy;
    easy.out_dir = root + "/easy";
    easy.seed = 0;
    cmd_build(easy);
    const RagStore store = load_store(easy);

    RunConfig hard = easy;
    hard.out_dir = root + "/hard";
    hard.n_records = 1000;
    cmd_build(hard);
    const RagStore hard_store = load_store(hard);

    criterion_1();
    criterion_2(store);
    criterion_3();
    criterion_4(store);
    criterion_5(store, easy);
    criterion_6(hard_store, hard);
    criterion_7(store, easy);
    criterion_8(hard_store, hard);
    criterion_9(store);
    criterion_10(hard_store, hard);
    criterion_11(easy);

    fs::remove_all(root);
    if (failures) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all 11 criteria passed\n");
    return 0;
}
