// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hatewatch/types.hpp"
#include "json.hpp"

namespace hatewatch {

/// Lower-cased word pieces: runs of alphanumerics, '_' and non-ASCII bytes.
std::vector<std::string> split_words(std::string_view text);

/// Word-level vocabulary with reserved special tokens.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kCls = 1;
    static constexpr int kUnk = 2;
    static constexpr int kBos = 3;

    Vocabulary();

    /// Adds every word seen in `texts` at least `min_count` times, in order
    /// of first appearance.
    static Vocabulary build(const std::vector<std::string>& texts, int min_count = 1);

    int size() const { return static_cast<int>(tokens_.size()); }
    int id(const std::string& word) const;
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

    /// [CLS] followed by word ids, truncated to `max_len` positions.
    TokenSequence encode(std::string_view text, int max_len) const;

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);

private:
    void add(const std::string& word);
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace hatewatch
