// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>

namespace hatewatch {

/// Invalid configuration: bad dimensions, coefficients, or unknown keys.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unusable input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Token sequence longer than the configured maximum.
class LengthError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A non-finite value appeared in a forward pass or loss term.
class NumericError : public std::runtime_error {
public:
    NumericError(std::string term, const std::string& detail)
        : std::runtime_error("non-finite " + term + ": " + detail), term_(std::move(term)) {}
    const std::string& term() const { return term_; }

private:
    std::string term_;
};

}  // namespace hatewatch
