#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ggpp/encoder.hpp"
#include "ggpp/tokenizer.hpp"
#include "ggpp/vecstore.hpp"

namespace ggpp {

struct PassageRecord {
    std::uint64_t id = 0;
    std::string passage_text;
    std::string prompt_text; // the paired user query
    std::string answer_key;  // the fact field the query asks for
    std::string constraint_type;
};

// Read-only after construction: encoder + index + record map.
struct RagStore {
    EncoderWeights weights;
    Vocabulary vocab;
    HnswIndex index;
    std::map<std::uint64_t, PassageRecord> records;

    Tensor embed_text(const std::string& text) const;
    Tensor embed_ids(const std::vector<TokenId>& ids) const;
};

RagStore encode_corpus(EncoderWeights weights, Vocabulary vocab,
                       const std::vector<PassageRecord>& records,
                       HnswIndex::Params params = {});

RetrievalResult retrieve(const RagStore& store, const std::string& query_text, std::size_t k);
RetrievalResult retrieve_embedding(const RagStore& store, const Tensor& query_embedding,
                                   std::size_t k);

// 1-based rank of the passage within top-k_max, or nullopt when outside.
std::optional<std::size_t> rank_of(const RagStore& store, const std::string& query_text,
                                   std::uint64_t passage_id, std::size_t k_max);

// Answer generation stub: the answer_key of the top-1 retrieved passage.
std::string answer_stub(const RagStore& store, const std::string& query_text, std::size_t k);

// Line-delimited corpus records: id \t constraint_type \t passage \t prompt \t answer.
std::vector<PassageRecord> load_corpus_file(const std::string& path);
void save_corpus_file(const std::vector<PassageRecord>& records, const std::string& path);

} // namespace ggpp
