// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/tokenizer.hpp"

#include <cctype>
#include <map>

#include "hatewatch/errors.hpp"

namespace hatewatch {

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto u = static_cast<unsigned char>(ch);
        if (std::isalnum(u) || ch == '_' || u >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vocabulary::Vocabulary() {
    for (const char* s : {"[PAD]", "[CLS]", "[UNK]", "[BOS]"}) add(s);
}

void Vocabulary::add(const std::string& word) {
    if (index_.count(word)) return;
    index_[word] = static_cast<int>(tokens_.size());
    tokens_.push_back(word);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, int min_count) {
    std::map<std::string, int> counts;
    std::vector<std::string> order;
    for (const auto& t : texts)
        for (auto& w : split_words(t))
            if (counts[w]++ == 0) order.push_back(w);
    Vocabulary v;
    for (const auto& w : order)
        if (counts[w] >= min_count) v.add(w);
    return v;
}

int Vocabulary::id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
}

TokenSequence Vocabulary::encode(std::string_view text, int max_len) const {
    if (max_len < 1) throw ConfigError("max_len must be at least 1");
    TokenSequence seq;
    seq.token_ids.push_back(kCls);
    for (const auto& w : split_words(text)) {
        if (static_cast<int>(seq.token_ids.size()) >= max_len) break;
        seq.token_ids.push_back(id(w));
    }
    seq.attention_mask.assign(seq.token_ids.size(), 1);
    return seq;
}

nlohmann::json Vocabulary::to_json() const { return nlohmann::json(tokens_); }

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
    Vocabulary v;
    const auto tokens = j.get<std::vector<std::string>>();
    if (tokens.size() < 4 || tokens[0] != "[PAD]" || tokens[1] != "[CLS]")
        throw DataError("vocabulary file does not start with the reserved tokens");
    for (std::size_t i = 4; i < tokens.size(); ++i) v.add(tokens[i]);
    return v;
}

}  // namespace hatewatch
