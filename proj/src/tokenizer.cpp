#include "ggpp/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace ggpp {

const std::string Vocabulary::kMaskText = "[MASK]";
const std::string Vocabulary::kPadText = "[PAD]";
const std::string Vocabulary::kUnkText = "[UNK]";

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus, std::size_t max_size) {
    if (max_size < 4)
        throw ConfigError("vocabulary max_size must be at least 4");
    std::map<std::string, std::size_t> freq; // ordered map fixes the lexicographic tie-break
    for (const auto& text : corpus)
        for (const auto& w : split_words(text))
            ++freq[w];
    freq.erase(kMaskText);
    freq.erase(kPadText);
    freq.erase(kUnkText);

    std::vector<const std::pair<const std::string, std::size_t>*> ranked;
    ranked.reserve(freq.size());
    for (const auto& kv : freq) ranked.push_back(&kv);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto* a, const auto* b) { return a->second > b->second; });

    Vocabulary v;
    v.id_to_token_ = {kMaskText, kPadText, kUnkText};
    for (const auto* kv : ranked) {
        if (v.id_to_token_.size() >= max_size) break;
        v.id_to_token_.push_back(kv->first);
    }
    for (TokenId id = 0; id < v.id_to_token_.size(); ++id)
        v.token_to_id_[v.id_to_token_[id]] = id;
    return v;
}

TokenId Vocabulary::id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(TokenId id) const {
    if (id >= id_to_token_.size())
        throw BoundsError("token id out of range");
    return id_to_token_[id];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open vocabulary file for writing: " + path);
    for (const auto& tok : id_to_token_) out << tok << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) v.id_to_token_.push_back(line);
    if (v.id_to_token_.size() < kNumSpecial + 1 ||
        v.id_to_token_[kMask] != kMaskText ||
        v.id_to_token_[kPad] != kPadText ||
        v.id_to_token_[kUnk] != kUnkText)
        throw FormatError("vocabulary file missing special tokens: " + path);
    for (TokenId id = 0; id < v.id_to_token_.size(); ++id)
        v.token_to_id_[v.id_to_token_[id]] = id;
    return v;
}

TokenSequence encode(const Vocabulary& v, const std::string& text) {
    TokenSequence seq;
    seq.source_text = text;
    for (const auto& w : split_words(text))
        seq.ids.push_back(v.id_of(w));
    return seq;
}

std::string decode(const Vocabulary& v, const std::vector<TokenId>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += v.token_of(ids[i]);
    }
    return out;
}

std::string mask_at(const std::string& text, std::size_t index) {
    std::vector<std::string> words = split_words(text);
    if (index >= words.size())
        throw BoundsError("mask_at: index out of range");
    words[index] = Vocabulary::kMaskText;
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

TokenSequence pad_to(const TokenSequence& seq, std::size_t length, TokenId pad_id) {
    if (seq.ids.size() > length)
        throw BoundsError("pad_to: sequence longer than target length");
    TokenSequence out = seq;
    out.ids.resize(length, pad_id);
    return out;
}

} // namespace ggpp
