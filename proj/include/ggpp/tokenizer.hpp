#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ggpp/errors.hpp"

namespace ggpp {

using TokenId = std::uint32_t;

// Word-level vocabulary. Tokens are whitespace-separated words; unseen words
// map to [UNK]. Ids are stable across save/load.
class Vocabulary {
public:
    static constexpr TokenId kMask = 0;
    static constexpr TokenId kPad = 1;
    static constexpr TokenId kUnk = 2;
    static constexpr std::size_t kNumSpecial = 3;

    static const std::string kMaskText; // "[MASK]"
    static const std::string kPadText;  // "[PAD]"
    static const std::string kUnkText;  // "[UNK]"

    // Tokens ranked by corpus frequency, ties broken lexicographically.
    static Vocabulary build(const std::vector<std::string>& corpus, std::size_t max_size);

    std::size_t size() const { return id_to_token_.size(); }
    TokenId id_of(const std::string& token) const; // kUnk if absent
    const std::string& token_of(TokenId id) const;
    bool is_special(TokenId id) const { return id < kNumSpecial; }

    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    std::unordered_map<std::string, TokenId> token_to_id_;
    std::vector<std::string> id_to_token_;
};

struct TokenSequence {
    std::vector<TokenId> ids;
    std::string source_text;

    std::size_t size() const { return ids.size(); }
};

std::vector<std::string> split_words(const std::string& text);

TokenSequence encode(const Vocabulary& v, const std::string& text);
std::string decode(const Vocabulary& v, const std::vector<TokenId>& ids);

// Replaces the index-th word with [MASK]; all other words untouched.
std::string mask_at(const std::string& text, std::size_t index);

// Appends [PAD] ids up to `length`. Longer sequences are an error, never
// silently truncated.
TokenSequence pad_to(const TokenSequence& seq, std::size_t length, TokenId pad_id = Vocabulary::kPad);

// Detection-pipeline padding length.
inline constexpr std::size_t kDetectionPadLen = 100;

} // namespace ggpp
