// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "hatewatch/errors.hpp"

namespace hatewatch {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

TargetTaxonomy::TargetTaxonomy(std::vector<std::string> classes) : classes_(std::move(classes)) {
    if (classes_.size() < 2) throw ConfigError("taxonomy needs at least 2 classes");
    std::set<std::string> seen;
    for (const auto& c : classes_)
        if (!seen.insert(lower(c)).second) throw ConfigError("duplicate taxonomy class " + c);
}

TargetTaxonomy TargetTaxonomy::standard() {
    return TargetTaxonomy({"Ability/Disability", "Class", "Gender", "Immigration Status", "Nationality", "Race",
                           "Religion", "Sexuality", "Sexual Preferences"});
}

std::optional<int> TargetTaxonomy::index_of(const std::string& name) const {
    const std::string key = lower(name);
    for (std::size_t i = 0; i < classes_.size(); ++i)
        if (lower(classes_[i]) == key) return static_cast<int>(i);
    return std::nullopt;
}

}  // namespace hatewatch
