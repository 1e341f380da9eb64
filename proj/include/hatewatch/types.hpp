// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <vector>

#include "hatewatch/tensor.hpp"

namespace hatewatch {

/// Tokenized text. `attention_mask[i]` is nonzero for real tokens.
struct TokenSequence {
    std::vector<int> token_ids;
    std::vector<std::uint8_t> attention_mask;

    std::size_t size() const { return token_ids.size(); }
};

/// Encoder output for one sequence.
struct Embedding {
    std::vector<double> pooled;  // h_d
    Matrix sequence;             // s_l x h_d
};

/// Gaussian causal latent and its reparameterized sample.
struct CausalLatent {
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<double> sample;
};

/// Platform-dependent (target) latent.
struct TargetLatent {
    std::vector<double> vector;
};

/// Decoder conditioning vector built from both latents.
struct RecombinedLatent {
    std::vector<double> vector;
};

/// Probability vector over target classes with its confidence weight.
struct SoftLabel {
    std::vector<double> probs;
    double confidence = 0.0;
};

}  // namespace hatewatch
