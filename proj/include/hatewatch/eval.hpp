// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hatewatch/train.hpp"

namespace hatewatch {

struct NamedCorpus {
    std::string name;
    std::vector<data::ExampleRecord> records;
};

struct GridCell {
    std::string source;
    std::string target;
    /// Empty when the cell failed.
    std::optional<double> macro_f1;
    std::array<double, 2> f1{};
    std::int64_t n_examples = 0;
    std::string error;
};

/// Source x target macro-F1 grid. Rows follow `sources`, columns `targets`.
struct EvalReport {
    std::vector<std::string> sources;
    std::vector<std::string> targets;
    std::vector<GridCell> cells;  // row-major
    std::string config_hash;

    const GridCell& cell(const std::string& source, const std::string& target) const;
    bool complete() const;

    /// Wide table: one row per source, one column per target, "FAILED" for
    /// failed cells.
    std::string grid_tsv() const;
    /// One line per cell with counts and errors; round-trips via from_tsv.
    std::string to_tsv() const;
    static EvalReport from_tsv(const std::string& text);
};

struct GridOptions {
    TrainOptions train;
    /// Share of each source held out as its in-dataset test set.
    double test_fraction = 0.1;
    /// Called once per trained source, e.g. to save the checkpoint.
    std::function<void(const std::string& source, const Checkpoint&)> on_trained;
};

/// The source corpus is split into a training pool and a held-out test set.
/// The model trains on the pool; the in-dataset cell scores the test set and
/// every other cell scores the full target corpus. A failure in one source
/// or cell is recorded in the report and the grid continues.
EvalReport cross_platform_grid(const std::vector<NamedCorpus>& sources, const std::vector<NamedCorpus>& targets,
                               const TrainConfig& config, const GridOptions& options = {});

/// Pool/test split used by the grid for `source`.
data::Split grid_split(const std::vector<data::ExampleRecord>& source, const TrainConfig& config,
                       double test_fraction);

struct LatentRow {
    std::string platform;
    int hate = 0;
    std::string id;
    std::vector<double> causal;  // μ, i.e. zero reparameterization noise
    std::vector<double> target;  // X_w
};

/// `n_per_platform` rows from each corpus, chosen by `seed` and kept in
/// corpus order. Throws ConfigError when a corpus is smaller than requested.
std::vector<LatentRow> export_latents(const Checkpoint& ckpt, const std::vector<NamedCorpus>& corpora,
                                      int n_per_platform, std::uint64_t seed,
                                      const FeatureTable* features = nullptr);

/// Tab-separated with a header; values are printed with full precision.
void write_latents(const std::filesystem::path& path, const std::vector<LatentRow>& rows);
std::vector<LatentRow> read_latents(const std::filesystem::path& path);

enum class LatentKind { Causal, Target };

/// Mean distance between platform-a and platform-b latents over the mean
/// distance within each platform, pooling pairs across hate classes and
/// pairing only rows of the same class. Classes missing from either
/// platform are skipped.
double distance_ratio(const std::vector<LatentRow>& rows, LatentKind kind, const std::string& platform_a,
                      const std::string& platform_b);

}  // namespace hatewatch
