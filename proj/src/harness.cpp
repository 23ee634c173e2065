#include "ggpp/harness.hpp"

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "ggpp/rng.hpp"

namespace ggpp {

void RunConfig::validate() const {
    if (out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
    if (n_records < 2) throw ConfigError("config: n_records must be >= 2");
    if (!is_constraint_type(constraint_type))
        throw ConfigError("config: unknown constraint_type: " + constraint_type);
    if (variant != "ggpp" && variant != "ggpp+instruction" && variant != "gcg" &&
        variant != "uat")
        throw ConfigError("config: unknown variant: " + variant);
    if (n_queries < 1) throw ConfigError("config: n_queries must be >= 1");
    if (detect_seeds < 1) throw ConfigError("config: detect_seeds must be >= 1");
    encoder.validate();
    attack.validate();
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const std::uint64_t out = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": " + v);
    }
}

double parse_f64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": " + v);
    }
}

} // namespace

void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "out_dir") cfg.out_dir = value;
    else if (key == "corpus_file") cfg.corpus_file = value;
    else if (key == "n_records") cfg.n_records = parse_u64(key, value);
    else if (key == "constraint_type") cfg.constraint_type = value;
    else if (key == "n_layers") cfg.encoder.n_layers = parse_u64(key, value);
    else if (key == "n_heads") cfg.encoder.n_heads = parse_u64(key, value);
    else if (key == "d_model") cfg.encoder.d_model = parse_u64(key, value);
    else if (key == "d_ff") cfg.encoder.d_ff = parse_u64(key, value);
    else if (key == "max_seq") cfg.encoder.max_seq = parse_u64(key, value);
    else if (key == "vocab_size") cfg.encoder.vocab_size = parse_u64(key, value);
    else if (key == "causal") {
        if (value != "true" && value != "false")
            throw ConfigError("config: causal must be true or false");
        cfg.encoder.causal = value == "true";
    } else if (key == "warmup_steps") cfg.warmup_steps = parse_u64(key, value);
    else if (key == "warmup_lr") cfg.warmup_lr = parse_f64(key, value);
    else if (key == "align_steps") cfg.align_steps = parse_u64(key, value);
    else if (key == "align_lr") cfg.align_lr = parse_f64(key, value);
    else if (key == "prefix_len") cfg.attack.prefix_len = parse_u64(key, value);
    else if (key == "max_epochs") cfg.attack.max_epochs = parse_u64(key, value);
    else if (key == "k_cand") cfg.attack.k_cand = parse_u64(key, value);
    else if (key == "subsets_per_epoch") cfg.attack.subsets_per_epoch = parse_u64(key, value);
    else if (key == "retrieval_k") cfg.attack.retrieval_k = parse_u64(key, value);
    else if (key == "lambda") cfg.attack.lambda = parse_f64(key, value);
    else if (key == "loss") {
        if (value == "sigmoid_mse") cfg.attack.loss_kind = LossKind::SigmoidMse;
        else if (value == "cosine") cfg.attack.loss_kind = LossKind::Cosine;
        else throw ConfigError("config: loss must be sigmoid_mse or cosine");
    } else if (key == "variant") cfg.variant = value;
    else if (key == "n_queries") cfg.n_queries = parse_u64(key, value);
    else if (key == "instruction") cfg.instruction_text = value;
    else if (key == "n_per_class") cfg.n_per_class = parse_u64(key, value);
    else if (key == "detect_seeds") cfg.detect_seeds = parse_u64(key, value);
    else if (key == "workers") cfg.workers = parse_u64(key, value);
    else if (key == "seed") {
        cfg.seed = parse_u64(key, value);
        cfg.encoder.seed = cfg.seed;
        cfg.attack.seed = cfg.seed;
    } else throw ConfigError("config: unknown key: " + key);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' at line " + std::to_string(line_no));
        apply_config_line(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void export_report(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open report file for writing: " + path);
    out << "# report\t" << report.name << '\n';
    out << "# seed\t" << report.seed << '\n';
    for (const auto& [k, v] : report.params)
        out << "# param\t" << k << '\t' << v << '\n';
    for (std::size_t i = 0; i < report.columns.size(); ++i)
        out << (i ? "\t" : "") << report.columns[i];
    out << '\n';
    for (const auto& row : report.rows) {
        if (row.size() != report.columns.size())
            throw ContractError("export_report: ragged row");
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "\t" : "") << format_double(row[i]);
        out << '\n';
    }
    if (!out) throw FormatError("report write failure: " + path);
}

ExperimentReport parse_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open report file: " + path);
    ExperimentReport r;
    std::string line;
    bool have_columns = false;
    while (std::getline(in, line)) {
        if (line.rfind("# report\t", 0) == 0) {
            r.name = line.substr(9);
        } else if (line.rfind("# seed\t", 0) == 0) {
            r.seed = std::stoull(line.substr(7));
        } else if (line.rfind("# param\t", 0) == 0) {
            const std::string rest = line.substr(8);
            const std::size_t tab = rest.find('\t');
            if (tab == std::string::npos) throw FormatError("report: bad param line");
            r.params.emplace_back(rest.substr(0, tab), rest.substr(tab + 1));
        } else if (!have_columns) {
            std::istringstream row(line);
            std::string cell;
            while (std::getline(row, cell, '\t')) r.columns.push_back(cell);
            have_columns = true;
        } else {
            if (line.empty()) continue;
            std::istringstream row(line);
            std::string cell;
            std::vector<double> vals;
            while (std::getline(row, cell, '\t')) vals.push_back(std::stod(cell));
            if (vals.size() != r.columns.size())
                throw FormatError("report: ragged data row");
            r.rows.push_back(std::move(vals));
        }
    }
    return r;
}

RagStore load_store(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    for (const std::string& p :
         {cfg.weights_path(), cfg.vocab_path(), cfg.index_path(), cfg.corpus_path()})
        if (!fs::exists(p))
            throw NotFoundError("store artifact missing (run build first): " + p);
    RagStore store;
    store.weights = load_weights(cfg.weights_path());
    store.vocab = Vocabulary::load(cfg.vocab_path());
    store.index = HnswIndex::load(cfg.index_path());
    for (PassageRecord& r : load_corpus_file(cfg.corpus_path()))
        store.records[r.id] = std::move(r);
    return store;
}

ExperimentReport cmd_build(const RunConfig& cfg) {
    cfg.validate();
    std::vector<PassageRecord> records;
    if (!cfg.corpus_file.empty()) {
        records = load_corpus_file(cfg.corpus_file);
        if (records.size() < 2) throw ConfigError("external corpus has fewer than 2 records");
    } else {
        records = to_passage_records(generate({cfg.n_records, cfg.constraint_type, cfg.seed}));
    }

    std::vector<std::string> texts;
    texts.reserve(2 * records.size() + 1);
    for (const PassageRecord& r : records) {
        texts.push_back(r.passage_text);
        texts.push_back(r.prompt_text);
    }
    texts.push_back(cfg.instruction_text);
    Vocabulary vocab = Vocabulary::build(texts, cfg.encoder.vocab_size);

    EncoderConfig ecfg = cfg.encoder;
    ecfg.vocab_size = vocab.size();
    ecfg.seed = cfg.seed;
    EncoderWeights weights = init_weights(ecfg);
    if (cfg.warmup_steps > 0)
        warmup_lm(weights, vocab, texts, {cfg.warmup_steps, cfg.warmup_lr, cfg.seed + 1});
    if (cfg.align_steps > 0) {
        std::vector<std::pair<std::string, std::string>> pairs;
        for (const PassageRecord& r : records)
            pairs.emplace_back(r.prompt_text, r.passage_text);
        AlignConfig acfg;
        acfg.steps = cfg.align_steps;
        acfg.learning_rate = cfg.align_lr;
        acfg.seed = cfg.seed + 2;
        warmup_align(weights, vocab, pairs, acfg);
    }

    HnswIndex::Params params;
    params.seed = cfg.seed;
    RagStore store = encode_corpus(std::move(weights), std::move(vocab), records, params);

    std::filesystem::create_directories(cfg.out_dir);
    save_weights(store.weights, cfg.weights_path());
    store.vocab.save(cfg.vocab_path());
    store.index.save(cfg.index_path());
    save_corpus_file(records, cfg.corpus_path());

    std::vector<HitCase> cases;
    for (const PassageRecord& r : records)
        cases.push_back(HitCase{r.id, retrieve(store, r.prompt_text, 10)});

    ExperimentReport report;
    report.name = "build";
    report.seed = cfg.seed;
    report.params.emplace_back("n_records", std::to_string(records.size()));
    report.params.emplace_back("constraint_type", cfg.constraint_type);
    report.params.emplace_back("vocab_size", std::to_string(store.vocab.size()));
    report.params.emplace_back("warmup_steps", std::to_string(cfg.warmup_steps));
    report.params.emplace_back("align_steps", std::to_string(cfg.align_steps));
    report.columns = {"k", "hit_rate"};
    report.rows.push_back({1.0, hit_rate(cases, 1)});
    report.rows.push_back({10.0, hit_rate(cases, 10)});
    export_report(report, cfg.out_dir + "/build.report.tsv");
    return report;
}

namespace {

// Deterministic per-query derived seed, independent of query order.
std::uint64_t query_seed(std::uint64_t base, std::uint64_t query_id) {
    return Rng(base ^ (query_id * 0x9e3779b97f4a7c15ull)).next_u64();
}

std::uint64_t pick_target(const RagStore& store, std::uint64_t original_id, std::uint64_t seed) {
    std::vector<std::uint64_t> candidates;
    const std::string& type = store.records.at(original_id).constraint_type;
    for (const auto& [id, r] : store.records)
        if (id != original_id && r.constraint_type == type) candidates.push_back(id);
    if (candidates.empty())
        throw ContractError("pick_target: no other record shares the constraint type");
    return candidates[Rng(seed).below(candidates.size())];
}

} // namespace

std::vector<QueryAttack> run_attacks(const RagStore& store, const RunConfig& cfg,
                                     const std::string& variant, std::size_t n_queries,
                                     double lambda_override) {
    // §5-style filtering: keep queries whose own passage is retrieved.
    std::vector<std::uint64_t> filtered;
    for (const auto& [id, r] : store.records) {
        if (filtered.size() == n_queries) break;
        if (retrieve(store, r.prompt_text, cfg.attack.retrieval_k).contains(id))
            filtered.push_back(id);
    }
    if (filtered.size() < n_queries)
        throw ConfigError("run_attacks: only " + std::to_string(filtered.size()) +
                          " of " + std::to_string(n_queries) +
                          " requested queries pass the retrieval filter");

    std::vector<QueryAttack> results(filtered.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= filtered.size()) return;
            try {
                const std::uint64_t qid = filtered[i];
                const std::uint64_t qseed = query_seed(cfg.seed, qid);
                const std::uint64_t target = pick_target(store, qid, qseed);
                AttackConfig acfg = cfg.attack;
                acfg.seed = qseed;
                if (lambda_override >= 0.0) acfg.lambda = lambda_override;
                const PassageRecord& rec = store.records.at(qid);
                AttackOutcome out;
                if (variant == "ggpp") {
                    out = ggpp_optimize(store, rec, target, qid, acfg);
                } else if (variant == "ggpp+instruction") {
                    out = with_instruction(cfg.instruction_text, store, rec, target, qid, acfg);
                } else if (variant == "gcg") {
                    out = gcg_adapted(store, rec, target, qid, acfg);
                } else if (variant == "uat") {
                    out = uat_adapted(store, rec, target, qid, acfg);
                } else {
                    throw ConfigError("run_attacks: unknown variant: " + variant);
                }
                results[i] = QueryAttack{qid, target, std::move(out)};
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next.store(filtered.size());
                return;
            }
        }
    };

    std::size_t n_workers = cfg.workers ? cfg.workers : std::thread::hardware_concurrency();
    if (n_workers == 0) n_workers = 1;
    n_workers = std::min(n_workers, filtered.size());
    if (n_workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

void save_attacks(const std::vector<AttackedQuery>& attacks, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open attacks file for writing: " + path);
    for (const AttackedQuery& a : attacks) {
        out << a.query_id << '\t';
        for (std::size_t i = 0; i < a.prefix.size(); ++i)
            out << (i ? " " : "") << a.prefix[i];
        out << '\t' << a.query_text << '\t' << a.original_passage << '\n';
    }
}

std::vector<AttackedQuery> load_attacks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open attacks file (run attack first): " + path);
    std::vector<AttackedQuery> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        AttackedQuery a;
        std::string id_field, prefix_field;
        if (!std::getline(row, id_field, '\t') || !std::getline(row, prefix_field, '\t') ||
            !std::getline(row, a.query_text, '\t') || !std::getline(row, a.original_passage))
            throw FormatError("attacks file: malformed record at line " +
                              std::to_string(line_no));
        try {
            a.query_id = std::stoull(id_field);
            std::istringstream ids(prefix_field);
            std::string tok;
            while (ids >> tok) a.prefix.push_back(static_cast<TokenId>(std::stoul(tok)));
        } catch (const std::exception&) {
            throw FormatError("attacks file: bad number at line " + std::to_string(line_no));
        }
        if (a.prefix.empty())
            throw FormatError("attacks file: empty prefix at line " + std::to_string(line_no));
        out.push_back(std::move(a));
    }
    return out;
}

namespace {

std::vector<double> outcome_row(const QueryAttack& qa) {
    const AttackOutcome& o = qa.outcome;
    return {static_cast<double>(qa.query_id),
            static_cast<double>(qa.target_id),
            o.converged ? 1.0 : 0.0,
            o.target_rank ? static_cast<double>(*o.target_rank) : 0.0,
            o.original_rank ? static_cast<double>(*o.original_rank) : 0.0,
            static_cast<double>(o.epochs),
            o.initial_distance,
            o.distance_history.empty() ? o.initial_distance : o.distance_history.back(),
            o.loss_trace.empty() ? 0.0 : o.loss_trace.back()};
}

const std::vector<std::string> kOutcomeColumns = {
    "query_id",     "target_id", "converged",        "target_rank",    "original_rank",
    "epochs",       "initial_distance", "final_distance", "final_loss"};

} // namespace

ExperimentReport cmd_attack(const RunConfig& cfg) {
    cfg.validate();
    const RagStore store = load_store(cfg);
    const std::vector<QueryAttack> attacks =
        run_attacks(store, cfg, cfg.variant, cfg.n_queries);

    std::vector<AttackOutcome> outcomes;
    std::vector<AttackedQuery> successes;
    for (const QueryAttack& qa : attacks) {
        outcomes.push_back(qa.outcome);
        if (qa.outcome.converged) {
            const PassageRecord& rec = store.records.at(qa.query_id);
            successes.push_back(AttackedQuery{qa.query_id, qa.outcome.prefix, rec.prompt_text,
                                              rec.passage_text});
        }
    }
    const SuccessRates rates = success_rates(outcomes, cfg.attack.retrieval_k);

    ExperimentReport report;
    report.name = "attack";
    report.seed = cfg.seed;
    report.params.emplace_back("variant", cfg.variant);
    report.params.emplace_back("lambda", format_double(cfg.attack.lambda));
    report.params.emplace_back("prefix_len", std::to_string(cfg.attack.prefix_len));
    report.params.emplace_back("top1_success", format_double(rates.top1));
    report.params.emplace_back("top" + std::to_string(cfg.attack.retrieval_k) + "_success",
                               format_double(rates.topk));
    report.columns = kOutcomeColumns;
    for (const QueryAttack& qa : attacks) report.rows.push_back(outcome_row(qa));

    std::filesystem::create_directories(cfg.out_dir);
    save_attacks(successes, cfg.attacks_path());
    export_report(report, cfg.out_dir + "/attack.report.tsv");
    return report;
}

ExperimentReport cmd_sweep_lambda(const RunConfig& cfg) {
    cfg.validate();
    const RagStore store = load_store(cfg);
    ExperimentReport report;
    report.name = "sweep-lambda";
    report.seed = cfg.seed;
    report.params.emplace_back("variant", cfg.variant);
    report.columns = {"lambda", "top1_success", "topk_success"};
    for (double lambda : kLambdaGrid) {
        const auto attacks = run_attacks(store, cfg, cfg.variant, cfg.n_queries, lambda);
        std::vector<AttackOutcome> outcomes;
        for (const QueryAttack& qa : attacks) outcomes.push_back(qa.outcome);
        const SuccessRates rates = success_rates(outcomes, cfg.attack.retrieval_k);
        report.rows.push_back({lambda, rates.top1, rates.topk});
    }
    std::filesystem::create_directories(cfg.out_dir);
    export_report(report, cfg.out_dir + "/lambda.report.tsv");
    return report;
}

ExperimentReport cmd_detect(const RunConfig& cfg) {
    cfg.validate();
    const RagStore store = load_store(cfg);
    const std::vector<AttackedQuery> attacks = load_attacks(cfg.attacks_path());
    if (attacks.size() < cfg.n_per_class)
        throw ConfigError("cmd_detect: need " +
                          std::to_string(cfg.n_per_class - attacks.size()) +
                          " more successful attacks (have " + std::to_string(attacks.size()) +
                          ", need " + std::to_string(cfg.n_per_class) + ")");

    ExperimentReport report;
    report.name = "detect";
    report.seed = cfg.seed;
    report.params.emplace_back("n_per_class", std::to_string(cfg.n_per_class));
    report.params.emplace_back("runs", std::to_string(cfg.detect_seeds));
    report.columns = {"probe", "n_parameters", "auroc", "precision", "recall", "f1"};
    for (ProbeKind kind : {ProbeKind::Act, ProbeKind::Sate}) {
        std::vector<DetectionMetrics> runs;
        std::size_t n_params = 0;
        for (std::size_t s = 0; s < cfg.detect_seeds; ++s) {
            const ProbeDataset ds =
                build_dataset(attacks, store, kind, cfg.n_per_class, cfg.seed + s);
            const LogRegModel model = train_logreg(ds);
            n_params = model.param_count();
            runs.push_back(evaluate(model, ds));
        }
        const DetectionMetrics avg = average_metrics(runs);
        report.params.emplace_back(std::string("probe_") +
                                       std::to_string(kind == ProbeKind::Act ? 0 : 1),
                                   probe_name(kind));
        report.rows.push_back({kind == ProbeKind::Act ? 0.0 : 1.0,
                               static_cast<double>(n_params), avg.auroc, avg.precision,
                               avg.recall, avg.f1});
    }

    std::filesystem::create_directories(cfg.out_dir);
    export_report(report, cfg.out_dir + "/detect.report.tsv");

    // Wall-clock block kept out of the main report so re-runs stay
    // byte-identical.
    ExperimentReport timing;
    timing.name = "detect-timing";
    timing.seed = cfg.seed;
    timing.columns = {"probe", "train_seconds", "infer_seconds"};
    for (const ProbeTiming& t :
         timing_report(attacks, store, cfg.n_per_class, cfg.detect_seeds, cfg.seed)) {
        timing.params.emplace_back(std::string("probe_") +
                                       std::to_string(t.kind == ProbeKind::Act ? 0 : 1),
                                   probe_name(t.kind));
        timing.rows.push_back(
            {t.kind == ProbeKind::Act ? 0.0 : 1.0, t.train_seconds, t.infer_seconds});
    }
    export_report(timing, cfg.out_dir + "/detect.timing.tsv");
    return report;
}

ExperimentReport cmd_curve(const RunConfig& cfg, std::uint64_t query_id) {
    cfg.validate();
    const RagStore store = load_store(cfg);
    const auto it = store.records.find(query_id);
    if (it == store.records.end())
        throw NotFoundError("cmd_curve: unknown query id " + std::to_string(query_id));
    const std::uint64_t qseed = query_seed(cfg.seed, query_id);
    const std::uint64_t target = pick_target(store, query_id, qseed);

    AttackConfig acfg = cfg.attack;
    acfg.seed = qseed;
    acfg.lambda = 0.0; // the descent-curve experiment fixes lambda at 0

    AttackOptions opts;
    opts.run_full_budget = true;
    opts.init = PrefixInit::TokenImportance;
    const AttackOutcome with_init =
        ggpp_optimize(store, it->second, target, query_id, acfg, opts);
    opts.init = PrefixInit::Random;
    const AttackOutcome without_init =
        ggpp_optimize(store, it->second, target, query_id, acfg, opts);

    ExperimentReport report;
    report.name = "curve";
    report.seed = cfg.seed;
    report.params.emplace_back("query_id", std::to_string(query_id));
    report.params.emplace_back("target_id", std::to_string(target));
    report.params.emplace_back("lambda", format_double(acfg.lambda));
    report.columns = {"epoch", "dist_with_init", "dist_random_init"};
    report.rows.push_back({0.0, with_init.initial_distance, without_init.initial_distance});
    const std::size_t n =
        std::min(with_init.distance_history.size(), without_init.distance_history.size());
    for (std::size_t e = 0; e < n; ++e)
        report.rows.push_back({static_cast<double>(e + 1), with_init.distance_history[e],
                               without_init.distance_history[e]});
    std::filesystem::create_directories(cfg.out_dir);
    export_report(report, cfg.out_dir + "/curve.report.tsv");
    return report;
}

} // namespace ggpp
