// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

namespace hatewatch {

/// Streaming RFC 4180 reader: quoted fields may contain delimiters, doubled
/// quotes and newlines. Tracks the physical line where each record starts.
class CsvReader {
public:
    CsvReader(std::istream& in, char delimiter) : in_(in), delim_(delimiter) {}

    /// Reads the next record. Returns false at end of input. On a malformed
    /// record (unterminated quote) returns true with `error` set.
    bool next(std::vector<std::string>& fields, std::int64_t& start_line, std::string& error);

private:
    std::istream& in_;
    char delim_;
    std::int64_t line_ = 1;
};

}  // namespace hatewatch
