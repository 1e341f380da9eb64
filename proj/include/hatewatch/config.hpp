// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hatewatch/losses.hpp"
#include "hatewatch/model.hpp"
#include "json.hpp"

namespace hatewatch {

/// Everything one training run depends on. Defaults are the published
/// hyperparameters where they exist.
struct TrainConfig {
    double lr = 1e-4;
    double dropout = 0.2;
    double alpha_t = 0.05;
    double alpha_c = 0.05;
    double delta_cont = 0.001;
    double delta_conf = 0.001;
    double eta = 0.95;
    double beta = 2.0;
    int batch_size = 32;
    int max_steps = 2000;
    int patience = 5;
    int eval_every = 200;
    std::uint64_t seed = 0;

    // AdamW moments and decoupled decay.
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;

    double val_fraction = 0.1;
    int refresh_period = 100;
    int min_count = 1;
    /// lexicon | llm | gold
    std::string weak_source = "lexicon";
    /// Fraction of seed weak labels replaced by a wrong class.
    double weak_noise = 0.0;
    /// Keyword file; empty selects the generator's lexicon for synthetic
    /// corpora and the shipped lexicon otherwise.
    std::string lexicon;
    /// Precomputed feature file for the pretrained backend.
    std::string features;

    ModelConfig model;

    losses::LossCoefficients coefficients() const { return {alpha_t, alpha_c, delta_cont, delta_conf}; }

    /// Throws ConfigError naming the offending key.
    void validate() const;
    /// Fully materialized config; model.dropout and model.vocab_size are
    /// omitted because they are derived.
    nlohmann::json to_json() const;
    /// Keys present in `j` override defaults. Unknown keys are errors.
    static TrainConfig from_json(const nlohmann::json& j);
    static TrainConfig load(const std::filesystem::path& path);
    /// FNV-1a of the canonical JSON, as 16 hex digits.
    std::string hash() const;
};

/// 64-bit FNV-1a over bytes, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace hatewatch
