// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hatewatch/config.hpp"
#include "hatewatch/data.hpp"
#include "hatewatch/errors.hpp"
#include "hatewatch/losses.hpp"
#include "hatewatch/metrics.hpp"
#include "hatewatch/model.hpp"
#include "hatewatch/optim.hpp"
#include "hatewatch/tokenizer.hpp"
#include "hatewatch/weak_labels.hpp"

namespace hatewatch {

struct EvalPoint {
    int step = 0;
    double macro_f1 = 0.0;
};

/// A trained (or initial) model with everything needed to resume or score.
struct Checkpoint {
    TrainConfig config;  // resolved; config.model.vocab_size is set
    Vocabulary vocab;
    ParameterStore params;
    AdamW optimizer;
    int step = 0;
    std::vector<EvalPoint> history;

    std::string config_hash() const { return config.hash(); }
    Model model() const { return Model(config.model, params); }

    /// Writes params.bin, optimizer.bin, config.json, vocab.json and
    /// metrics.json into `dir`.
    void save(const std::filesystem::path& dir) const;
    static Checkpoint load(const std::filesystem::path& dir);
};

/// The standard taxonomy for 9 classes, otherwise "class0".."classN-1".
TargetTaxonomy training_taxonomy(const TrainConfig& config);

/// Token sequences for `records`, truncated to max_len.
std::vector<TokenSequence> tokenize(const Vocabulary& vocab, const std::vector<data::ExampleRecord>& records,
                                    int max_len);

/// Precomputed feature rows for `records`; empty matrix for the toy backend.
Matrix feature_rows(const FeatureTable* table, const std::vector<data::ExampleRecord>& records,
                    std::span<const std::size_t> rows);

struct StepLog {
    int step = 0;
    losses::LossBreakdown losses;
    int selected = 0;       // |S|
    bool from_teacher = false;
};

/// Non-finite loss during training. Carries the last finite breakdown.
class TrainingAborted : public NumericError {
public:
    TrainingAborted(const NumericError& cause, int step, std::optional<losses::LossBreakdown> last)
        : NumericError(cause.term(), std::string("at step ") + std::to_string(step) + ": " + cause.what()),
          step_(step), last_(std::move(last)) {}
    int step() const { return step_; }
    const std::optional<losses::LossBreakdown>& last() const { return last_; }

private:
    int step_;
    std::optional<losses::LossBreakdown> last_;
};

struct TrainOptions {
    /// Seed weak labeler for the lexicon source and fallback of the llm
    /// source. Required for both.
    const weak::Lexicon* lexicon = nullptr;
    weak::LabelerClient* llm = nullptr;
    const FeatureTable* features = nullptr;
    std::function<void(const std::string&)> log;
    std::function<void(const StepLog&)> on_step;
};

struct TrainResult {
    Checkpoint best;
    std::vector<StepLog> steps;
    int steps_run = 0;
    bool stopped_early = false;
    int teacher_refreshes = 0;
    int empty_selection_steps = 0;
};

/// Multi-task training on one source corpus: the source is split into
/// train and validation, validation macro-F1 drives early stopping, and the
/// best-validation checkpoint is returned.
TrainResult train(const std::vector<data::ExampleRecord>& source, const TrainConfig& config,
                  const TrainOptions& options = {});

struct EvalResult {
    BinaryMetrics metrics;
    std::vector<int> predictions;
};

/// Argmax of the hate head with zero reparameterization noise.
EvalResult evaluate(const Checkpoint& ckpt, const std::vector<data::ExampleRecord>& corpus,
                    const FeatureTable* features = nullptr);
EvalResult evaluate(const Model& model, const Vocabulary& vocab, const std::vector<data::ExampleRecord>& corpus,
                    const FeatureTable* features = nullptr);

}  // namespace hatewatch
