// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hatewatch/taxonomy.hpp"
#include "json.hpp"

namespace hatewatch::data {

/// Source platforms with known schemas. Synthetic platforms are named
/// "synthetic-<suffix>".
enum class Platform { GAB, Reddit, X, YouTube, Synthetic };

Platform parse_platform(const std::string& name);
std::string platform_name(Platform p);
/// Whether the platform's corpus carries gold target annotations.
bool platform_has_targets(Platform p);
bool platform_has_targets(const std::string& platform_name);

struct ExampleRecord {
    std::string id;
    std::string text;
    int hate = 0;
    std::optional<std::string> gold_target;
    std::string platform;
};

struct CorpusSummary {
    std::int64_t n_posts = 0;
    std::int64_t n_hateful = 0;
    double hate_pct = 0.0;
    bool has_targets = false;

    nlohmann::json to_json() const;
    friend bool operator==(const CorpusSummary&, const CorpusSummary&) = default;
};

CorpusSummary summarize(const std::vector<ExampleRecord>& records, bool has_targets);

/// Column names and label mapping for one source file.
struct AdapterConfig {
    enum class Format { Csv, Tsv, Jsonl } format = Format::Csv;
    std::string id_column = "id";
    std::string text_column = "text";
    std::string label_column = "label";
    std::string target_column;  // empty: no target column
    /// Lower-cased source label -> binary hate label.
    std::map<std::string, int> label_map;

    /// Built-in mapping for each platform's public release.
    static AdapterConfig defaults(Platform p);
    /// Overrides defaults with the keys present in `j`.
    static AdapterConfig from_json(const nlohmann::json& j, Platform p);
};

struct LoadDiagnostic {
    std::int64_t line = 0;
    std::string message;
};

struct LoadResult {
    std::vector<ExampleRecord> records;
    CorpusSummary summary;
    std::int64_t rejected_labels = 0;
    std::int64_t malformed_rows = 0;
    std::vector<LoadDiagnostic> diagnostics;
};

/// Reads a platform file through its adapter. Rows with unknown labels are
/// rejected and counted; malformed rows are skipped with their line number.
/// Throws DataError only when the file cannot be read or lacks a required
/// column.
LoadResult load_corpus(const std::filesystem::path& path, Platform platform, const AdapterConfig& adapter);
LoadResult load_corpus(const std::filesystem::path& path, Platform platform);

/// Canonical line-delimited record format.
std::vector<ExampleRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<ExampleRecord>& records);
nlohmann::json record_to_json(const ExampleRecord& r);
ExampleRecord record_from_json(const nlohmann::json& j);

struct Split {
    std::vector<ExampleRecord> train;
    std::vector<ExampleRecord> validation;
};

/// Stratified by hate label and deterministic under `seed`. Both outputs
/// keep input order.
Split split(const std::vector<ExampleRecord>& records, double val_fraction, std::uint64_t seed);

/// Target tokens and class distribution of one synthetic platform.
struct SyntheticPlatform {
    std::string name;                                      // e.g. "synthetic-a"
    std::vector<std::vector<std::string>> class_tokens;    // one token list per target class
    std::vector<double> class_distribution;
};

/// Generator parameters. Labels depend only on causal tokens; target tokens
/// follow each platform's class distribution independently of the label,
/// except for the planted spurious fraction on `spurious_platform`.
struct SyntheticSpec {
    std::vector<std::string> causal_vocab;
    std::vector<std::string> neutral_vocab;
    std::vector<SyntheticPlatform> platforms;
    std::vector<std::string> taxonomy;
    int n_per_platform = 1000;
    double hate_rate = 0.5;
    std::uint64_t seed = 0;
    int min_neutral = 4;
    int max_neutral = 8;
    int max_causal = 2;
    int max_target = 2;
    /// Fraction of `spurious_platform` texts whose target class is chosen by
    /// the hate label (hate -> spurious_hate_class, otherwise
    /// spurious_clean_class).
    double spurious_fraction = 0.0;
    int spurious_platform = 0;
    int spurious_hate_class = 6;
    int spurious_clean_class = 1;

    /// Default vocabularies for `n_platforms` platforms with skewed,
    /// platform-specific class distributions.
    static SyntheticSpec standard(int n_platforms, int n_per_platform, std::uint64_t seed);
    /// Throws ConfigError on vocabulary overlap or invalid distributions.
    void validate() const;
    /// Keyword -> class map covering every platform's target tokens.
    std::map<std::string, int> lexicon() const;
};

struct SyntheticCorpus {
    std::string platform;
    std::vector<ExampleRecord> records;
};

std::vector<SyntheticCorpus> generate_synthetic(const SyntheticSpec& spec);

}  // namespace hatewatch::data
