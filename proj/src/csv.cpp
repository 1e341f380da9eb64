// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/csv.hpp"

namespace hatewatch {

bool CsvReader::next(std::vector<std::string>& fields, std::int64_t& start_line, std::string& error) {
    fields.clear();
    error.clear();
    start_line = line_;
    std::string cur;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in_.get()) != EOF) {
        any = true;
        const char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                if (in_.peek() == '"') {
                    cur.push_back('"');
                    in_.get();
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line_;
                cur.push_back(ch);
            }
            continue;
        }
        if (ch == '"' && cur.empty()) {
            in_quotes = true;
        } else if (ch == delim_) {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch == '\r') {
            // CRLF line ending
        } else if (ch == '\n') {
            ++line_;
            fields.push_back(std::move(cur));
            return true;
        } else {
            cur.push_back(ch);
        }
    }
    if (!any) return false;
    if (in_quotes) error = "unterminated quoted field";
    fields.push_back(std::move(cur));
    return true;
}

}  // namespace hatewatch
