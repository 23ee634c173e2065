#include "ggpp/rag.hpp"

#include <fstream>
#include <sstream>

namespace ggpp {

Tensor RagStore::embed_text(const std::string& text) const {
    return embed(weights, encode(vocab, text).ids, Vocabulary::kPad);
}

Tensor RagStore::embed_ids(const std::vector<TokenId>& ids) const {
    return embed(weights, ids, Vocabulary::kPad);
}

RagStore encode_corpus(EncoderWeights weights, Vocabulary vocab,
                       const std::vector<PassageRecord>& records,
                       HnswIndex::Params params) {
    if (records.empty()) throw ContractError("encode_corpus: no records");
    RagStore store;
    store.weights = std::move(weights);
    store.vocab = std::move(vocab);
    store.index = HnswIndex(store.weights.cfg.d_model, params);
    for (const PassageRecord& r : records) {
        if (store.records.count(r.id))
            throw ConflictError("encode_corpus: duplicate record id");
        store.index.insert(IndexEntry{r.id, store.embed_text(r.passage_text)});
        store.records[r.id] = r;
    }
    return store;
}

RetrievalResult retrieve(const RagStore& store, const std::string& query_text, std::size_t k) {
    if (query_text.empty() || split_words(query_text).empty())
        throw ContractError("retrieve: empty query");
    return store.index.search_topk(store.embed_text(query_text), k);
}

RetrievalResult retrieve_embedding(const RagStore& store, const Tensor& query_embedding,
                                   std::size_t k) {
    return store.index.search_topk(query_embedding, k);
}

std::optional<std::size_t> rank_of(const RagStore& store, const std::string& query_text,
                                   std::uint64_t passage_id, std::size_t k_max) {
    if (!store.records.count(passage_id))
        throw NotFoundError("rank_of: unknown passage id");
    const std::size_t r = retrieve(store, query_text, k_max).rank_of(passage_id);
    if (r == 0) return std::nullopt;
    return r;
}

std::string answer_stub(const RagStore& store, const std::string& query_text, std::size_t k) {
    RetrievalResult res = retrieve(store, query_text, k);
    if (res.hits.empty()) throw ContractError("answer_stub: empty store");
    const PassageRecord& top = store.records.at(res.hits.front().id);
    return "Answer : " + top.answer_key;
}

std::vector<PassageRecord> load_corpus_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open corpus file: " + path);
    std::vector<PassageRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        PassageRecord r;
        std::string id_field;
        if (!std::getline(row, id_field, '\t') ||
            !std::getline(row, r.constraint_type, '\t') ||
            !std::getline(row, r.passage_text, '\t') ||
            !std::getline(row, r.prompt_text, '\t') ||
            !std::getline(row, r.answer_key))
            throw FormatError("corpus file: malformed record at line " +
                              std::to_string(line_no));
        try {
            r.id = std::stoull(id_field);
        } catch (const std::exception&) {
            throw FormatError("corpus file: bad id at line " + std::to_string(line_no));
        }
        records.push_back(std::move(r));
    }
    return records;
}

void save_corpus_file(const std::vector<PassageRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open corpus file for writing: " + path);
    for (const PassageRecord& r : records)
        out << r.id << '\t' << r.constraint_type << '\t' << r.passage_text << '\t'
            << r.prompt_text << '\t' << r.answer_key << '\n';
}

} // namespace ggpp
