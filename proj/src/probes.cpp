#include "ggpp/probes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ggpp/attack.hpp"
#include "ggpp/io.hpp"
#include "ggpp/kernels.hpp"
#include "ggpp/rng.hpp"

namespace ggpp {

const char* probe_name(ProbeKind kind) { return kind == ProbeKind::Act ? "ACT" : "SATe"; }

FeatureVector act_features(const ForwardTrace& trace, std::uint64_t source_id,
                           std::size_t n_pad) {
    const Tensor& last = trace.h.back();
    const std::size_t n = last.rows(), d = last.cols();
    if (n > n_pad) throw BoundsError("act_features: query longer than pad length");
    FeatureVector f;
    f.kind = ProbeKind::Act;
    f.source_id = source_id;
    f.values.assign(d * n_pad, 0.0);
    std::copy(last.data.begin(), last.data.end(), f.values.begin());
    return f;
}

FeatureVector sate_features(const ForwardTrace& trace, std::uint64_t source_id,
                            std::size_t n_pad) {
    FeatureVector f;
    f.kind = ProbeKind::Sate;
    f.source_id = source_id;
    const std::size_t layers = trace.attn.size();
    const std::size_t heads = layers ? trace.attn[0].size() : 0;
    f.values.assign(layers * heads * n_pad * n_pad, 0.0);
    std::size_t block = 0;
    for (const auto& layer : trace.attn) {
        for (const Tensor& a : layer) {
            const std::size_t n = a.rows();
            if (n > n_pad) throw BoundsError("sate_features: query longer than pad length");
            double* dst = f.values.data() + block * n_pad * n_pad;
            for (std::size_t i = 0; i < n; ++i)
                std::copy(a.data.begin() + static_cast<std::ptrdiff_t>(i * n),
                          a.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * n),
                          dst + i * n_pad);
            ++block;
        }
    }
    return f;
}

std::vector<TokenId> control_prefix(const EncoderWeights& w, const Vocabulary& vocab,
                                    const std::string& original_passage,
                                    std::size_t prefix_len, std::uint64_t seed) {
    auto ranked = token_importance(w, vocab, original_passage);
    const std::size_t key_count = (ranked.size() + 1) / 2; // top half = "key tokens"
    if (prefix_len > key_count)
        throw ConfigError("control_prefix: passage too short for prefix length");
    std::vector<std::size_t> pool(key_count);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    Rng rng(seed);
    std::vector<TokenId> prefix;
    prefix.reserve(prefix_len);
    for (std::size_t i = 0; i < prefix_len; ++i) {
        const std::size_t j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
        prefix.push_back(vocab.id_of(ranked[pool[i]].token));
    }
    return prefix;
}

namespace {

FeatureVector extract(const RagStore& store, const std::vector<TokenId>& ids, ProbeKind kind,
                      std::uint64_t source_id) {
    const ForwardTrace trace = forward(store.weights, ids);
    return kind == ProbeKind::Act ? act_features(trace, source_id)
                                  : sate_features(trace, source_id);
}

} // namespace

ProbeDataset build_dataset(const std::vector<AttackedQuery>& attacks, const RagStore& store,
                           ProbeKind kind, std::size_t n_per_class, std::uint64_t seed) {
    if (attacks.size() < n_per_class)
        throw ConfigError("build_dataset: fewer successful attacks than n_per_class");
    Rng rng(seed);
    ProbeDataset ds;
    ds.features.reserve(2 * n_per_class);
    ds.labels.reserve(2 * n_per_class);
    for (std::size_t i = 0; i < n_per_class; ++i) {
        const AttackedQuery& aq = attacks[i];
        const auto query_ids = encode(store.vocab, aq.query_text).ids;

        std::vector<TokenId> perturbed = aq.prefix;
        perturbed.insert(perturbed.end(), query_ids.begin(), query_ids.end());
        ds.features.push_back(extract(store, perturbed, kind, aq.query_id));
        ds.labels.push_back(1);

        std::vector<TokenId> control = control_prefix(store.weights, store.vocab,
                                                      aq.original_passage, aq.prefix.size(),
                                                      rng.next_u64());
        control.insert(control.end(), query_ids.begin(), query_ids.end());
        ds.features.push_back(extract(store, control, kind, aq.query_id));
        ds.labels.push_back(0);
    }

    // Stratified 60/40 split: shuffle within each class, first 60% train.
    for (int cls : {1, 0}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < ds.labels.size(); ++i)
            if (ds.labels[i] == cls) idx.push_back(i);
        for (std::size_t i = 0; i + 1 < idx.size(); ++i)
            std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
        const std::size_t n_train = idx.size() * 6 / 10;
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_train ? ds.train_idx : ds.test_idx).push_back(idx[i]);
    }
    std::sort(ds.train_idx.begin(), ds.train_idx.end());
    std::sort(ds.test_idx.begin(), ds.test_idx.end());
    return ds;
}

double LogRegModel::score(const FeatureVector& f) const {
    if (f.values.size() != feature_len)
        throw DimensionError("probe score: feature length mismatch");
    double z = bias;
    for (std::size_t j = 0; j < active.size(); ++j)
        z += weights[j] * (f.values[active[j]] - mean[j]) / stdev[j];
    return z;
}

double LogRegModel::predict(const FeatureVector& f) const { return sigmoid(score(f)); }

namespace {

double logreg_loss(const std::vector<double>& X, const std::vector<int>& y, std::size_t n,
                   std::size_t d, const std::vector<double>& w, double b, double l2) {
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = kernels::dot(X.data() + i * d, w.data(), d) + b;
        // log(1 + exp(-|z|)) + max(0, -yz) form, overflow-safe
        const double yz = y[i] ? z : -z;
        loss += yz >= 0.0 ? std::log1p(std::exp(-yz)) : -yz + std::log1p(std::exp(yz));
    }
    loss /= static_cast<double>(n);
    return loss + 0.5 * l2 * kernels::dot(w.data(), w.data(), d);
}

} // namespace

LogRegModel train_logreg(const ProbeDataset& dataset, const LogRegConfig& cfg) {
    if (dataset.train_idx.empty()) throw ContractError("train_logreg: empty train split");
    bool has_pos = false, has_neg = false;
    for (std::size_t i : dataset.train_idx)
        (dataset.labels[i] ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        throw ContractError("train_logreg: train split has a single class");

    const std::size_t full = dataset.features.front().values.size();
    const std::size_t n = dataset.train_idx.size();

    LogRegModel m;
    m.kind = dataset.features.front().kind;
    m.feature_len = full;

    // Columns with zero train variance (padding slots, mostly) carry no
    // signal and a zero gradient forever; drop them up front.
    std::vector<double> col_mean(full, 0.0), col_sq(full, 0.0);
    for (std::size_t i : dataset.train_idx) {
        const std::vector<double>& v = dataset.features[i].values;
        if (v.size() != full) throw DimensionError("train_logreg: ragged features");
        for (std::size_t j = 0; j < full; ++j) {
            col_mean[j] += v[j];
            col_sq[j] += v[j] * v[j];
        }
    }
    for (std::size_t j = 0; j < full; ++j) {
        col_mean[j] /= static_cast<double>(n);
        const double var = col_sq[j] / static_cast<double>(n) - col_mean[j] * col_mean[j];
        if (var > 1e-18) {
            m.active.push_back(j);
            m.mean.push_back(col_mean[j]);
            m.stdev.push_back(std::sqrt(var));
        }
    }
    const std::size_t d = m.active.size();
    if (d == 0) throw ContractError("train_logreg: all features constant");

    std::vector<double> X(n * d);
    std::vector<int> y(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::vector<double>& v = dataset.features[dataset.train_idx[r]].values;
        y[r] = dataset.labels[dataset.train_idx[r]];
        for (std::size_t j = 0; j < d; ++j)
            X[r * d + j] = (v[m.active[j]] - m.mean[j]) / m.stdev[j];
    }

    std::vector<double> w(d, 0.0), gw(d), trial(d);
    double b = 0.0, gb = 0.0;
    double loss = logreg_loss(X, y, n, d, w, b, cfg.l2);

    std::size_t iter = 0;
    double gnorm = 0.0;
    for (; iter < cfg.max_iters; ++iter) {
        std::fill(gw.begin(), gw.end(), 0.0);
        gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = kernels::dot(X.data() + i * d, w.data(), d) + b;
            const double err = sigmoid(z) - static_cast<double>(y[i]);
            kernels::axpy(err, X.data() + i * d, gw.data(), d);
            gb += err;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        kernels::scale(inv_n, gw.data(), d);
        kernels::axpy(cfg.l2, w.data(), gw.data(), d);
        gb *= inv_n;

        gnorm = std::sqrt(kernels::dot(gw.data(), gw.data(), d) + gb * gb);
        if (gnorm < cfg.grad_tolerance) break;

        double lr = cfg.learning_rate;
        double new_loss = loss;
        double tb = b;
        while (lr > 1e-14) {
            std::copy(w.begin(), w.end(), trial.begin());
            kernels::axpy(-lr, gw.data(), trial.data(), d);
            tb = b - lr * gb;
            new_loss = logreg_loss(X, y, n, d, trial, tb, cfg.l2);
            if (new_loss < loss) break;
            lr *= 0.5;
        }
        if (new_loss >= loss) break; // no descent direction progress left
        w.swap(trial);
        b = tb;
        loss = new_loss;
    }

    m.weights = std::move(w);
    m.bias = b;
    m.iterations = iter;
    m.final_grad_norm = gnorm;
    return m;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw ContractError("auroc: bad inputs");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j + 1); // 1-based midrank
        for (std::size_t t = i; t < j; ++t) rank[order[t]] = mid;
        i = j;
    }
    double pos_ranks = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (labels[i]) {
            pos_ranks += rank[i];
            ++n_pos;
        }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw ContractError("auroc: single-class labels");
    return (pos_ranks - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

DetectionMetrics evaluate(const LogRegModel& model, const ProbeDataset& dataset) {
    if (dataset.test_idx.empty()) throw ContractError("evaluate: empty test split");
    std::vector<double> scores;
    std::vector<int> labels;
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i : dataset.test_idx) {
        const double z = model.score(dataset.features[i]);
        scores.push_back(z);
        labels.push_back(dataset.labels[i]);
        const bool pred = z >= 0.0; // sigmoid(z) >= 0.5
        if (pred && dataset.labels[i]) ++tp;
        if (pred && !dataset.labels[i]) ++fp;
        if (!pred && dataset.labels[i]) ++fn;
    }
    DetectionMetrics dm;
    dm.auroc = auroc(scores, labels);
    dm.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    dm.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    dm.f1 = dm.precision + dm.recall > 0.0
                ? 2.0 * dm.precision * dm.recall / (dm.precision + dm.recall)
                : 0.0;
    return dm;
}

DetectionMetrics average_metrics(const std::vector<DetectionMetrics>& runs) {
    if (runs.empty()) throw ContractError("average_metrics: no runs");
    DetectionMetrics out;
    for (const DetectionMetrics& r : runs) {
        out.auroc += r.auroc;
        out.precision += r.precision;
        out.recall += r.recall;
        out.f1 += r.f1;
    }
    const double n = static_cast<double>(runs.size());
    out.auroc /= n;
    out.precision /= n;
    out.recall /= n;
    out.f1 /= n;
    out.runs_averaged = runs.size();
    return out;
}

std::vector<ProbeTiming> timing_report(const std::vector<AttackedQuery>& attacks,
                                       const RagStore& store, std::size_t n_per_class,
                                       std::size_t runs, std::uint64_t seed) {
    using clock = std::chrono::steady_clock;
    std::vector<ProbeTiming> report;
    for (ProbeKind kind : {ProbeKind::Act, ProbeKind::Sate}) {
        const ProbeDataset ds = build_dataset(attacks, store, kind, n_per_class, seed);
        ProbeTiming t;
        t.kind = kind;
        t.runs = runs;
        for (std::size_t r = 0; r < runs; ++r) {
            const auto t0 = clock::now();
            const LogRegModel model = train_logreg(ds);
            const auto t1 = clock::now();
            t.train_seconds += std::chrono::duration<double>(t1 - t0).count();

            const FeatureVector& sample = ds.features[ds.test_idx.front()];
            constexpr std::size_t reps = 64; // amortize clock granularity
            const auto t2 = clock::now();
            double sink = 0.0;
            for (std::size_t i = 0; i < reps; ++i) sink += model.predict(sample);
            const auto t3 = clock::now();
            t.infer_seconds += std::chrono::duration<double>(t3 - t2).count() /
                               static_cast<double>(reps);
            (void)sink;
        }
        t.train_seconds /= static_cast<double>(runs);
        t.infer_seconds /= static_cast<double>(runs);
        report.push_back(t);
    }
    return report;
}

namespace {
constexpr char kProbeMagic[] = "GGPPPB01";
}

void save_probe(const LogRegModel& model, const std::string& path) {
    io::Writer out(path);
    out.bytes(kProbeMagic, 8);
    out.u64(model.kind == ProbeKind::Act ? 0 : 1);
    out.u64(model.feature_len);
    out.u64(model.active.size());
    for (std::size_t j : model.active) out.u64(j);
    out.f64_array(model.mean);
    out.f64_array(model.stdev);
    out.f64_array(model.weights);
    out.f64(model.bias);
    out.u64(model.iterations);
    out.f64(model.final_grad_norm);
    out.finish();
}

LogRegModel load_probe(const std::string& path) {
    io::Reader in(path);
    char magic[8];
    in.bytes(magic, 8);
    if (std::string(magic, 8) != kProbeMagic)
        throw FormatError("probe file: bad magic");
    LogRegModel m;
    m.kind = in.u64() == 0 ? ProbeKind::Act : ProbeKind::Sate;
    m.feature_len = in.u64();
    m.active.resize(in.checked_len(sizeof(std::uint64_t)));
    for (std::size_t& j : m.active) j = in.u64();
    m.mean = in.f64_array();
    m.stdev = in.f64_array();
    m.weights = in.f64_array();
    m.bias = in.f64();
    m.iterations = in.u64();
    m.final_grad_norm = in.f64();
    in.finish();
    if (m.mean.size() != m.active.size() || m.weights.size() != m.active.size())
        throw FormatError("probe file: inconsistent array lengths");
    return m;
}

} // namespace ggpp
