// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace hatewatch {

/// Ordered list of hate-target categories.
class TargetTaxonomy {
public:
    explicit TargetTaxonomy(std::vector<std::string> classes);

    /// The nine default categories.
    static TargetTaxonomy standard();

    int size() const { return static_cast<int>(classes_.size()); }
    const std::string& name(int index) const { return classes_.at(static_cast<std::size_t>(index)); }
    const std::vector<std::string>& classes() const { return classes_; }
    /// Case-insensitive exact lookup.
    std::optional<int> index_of(const std::string& name) const;

private:
    std::vector<std::string> classes_;
};

}  // namespace hatewatch
