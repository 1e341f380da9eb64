// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hatewatch/autodiff.hpp"
#include "hatewatch/types.hpp"
#include "json.hpp"

namespace hatewatch {

enum class Backend { Toy, Pretrained };
enum class Pooling { FirstToken, Mean };
/// What the hate classifier reads: the causal latent, or the pooled
/// embedding before disentanglement (ablation).
enum class HateInput { Causal, Pooled };

struct ModelConfig {
    Backend backend = Backend::Toy;
    int vocab_size = 0;
    int max_len = 32;
    int h_d = 64;
    int layers = 2;
    int heads = 4;
    int ffn = 128;
    int h_causal = 64;
    int h_disc = 32;
    int n_classes = 9;
    /// Affine layers per disentanglement head; GELU between layers.
    int head_depth = 1;
    int head_hidden = 64;
    int decoder_dim = 64;
    int decoder_heads = 4;
    int decoder_ffn = 128;
    Pooling pooling = Pooling::FirstToken;
    HateInput hate_input = HateInput::Causal;
    double dropout = 0.2;

    void validate() const;
    nlohmann::json to_json() const;
    /// Reads the keys present in `j` over defaults; unknown keys are errors.
    static ModelConfig from_json(const nlohmann::json& j);
};

/// Precomputed sentence vectors from an external encoder, keyed by text.
/// Backs the pretrained backend: the encoder is frozen and only the heads
/// and decoder train.
class FeatureTable {
public:
    /// Line-delimited {"text": ..., "vector": [...]} records.
    static FeatureTable load(const std::filesystem::path& path);
    void add(const std::string& text, std::vector<double> vector);

    int dim() const { return dim_; }
    std::size_t size() const { return rows_.size(); }
    /// Throws DataError for texts without a vector.
    std::span<const double> lookup(const std::string& text) const;

private:
    int dim_ = 0;
    std::unordered_map<std::string, std::vector<double>> rows_;
};

/// Padded token ids of several sequences, row-major batch x seq.
struct Batch {
    int size = 0;
    int seq = 0;
    std::vector<int> ids;
    std::vector<std::uint8_t> mask;
    Matrix features;  // size x feature dim; pretrained backend only

    static Batch collate(std::span<const TokenSequence> seqs);
};

struct ForwardOptions {
    bool train = false;
    std::mt19937_64* rng = nullptr;  // dropout; required when train
    /// batch x h_causal reparameterization noise; empty means zero noise.
    Matrix noise;
    bool decode = true;
    bool target = true;
    /// Added to the target latent X_w when non-empty (batch x h_disc).
    Matrix target_offset;
};

/// Tape handles of every intermediate the losses need.
struct ForwardVars {
    Var sequence;      // (batch*seq) x h_d, toy backend only
    Var pooled;        // batch x h_d
    Var mu;            // batch x h_causal
    Var sigma;
    Var sample;
    Var target;        // batch x h_disc
    Var target_probs;  // batch x C
    Var recombined;    // batch x decoder_dim
    Var recon_probs;   // (batch*seq) x V
    Var hate_probs;    // batch x 2
};

/// Encoder, disentanglement heads, target classifier, decoder and hate
/// classifier over one parameter store.
class Model {
public:
    Model(const ModelConfig& config, std::uint64_t seed);
    /// Wraps existing parameters; their layout must match `config`.
    Model(const ModelConfig& config, ParameterStore params);

    const ModelConfig& config() const { return config_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    /// Batched forward pass on `tape`, which must be bound to this model's
    /// store or a store of identical layout.
    ForwardVars forward(Tape& tape, const Batch& batch, const ForwardOptions& opts) const;

    /// Parameter-name prefixes of each component.
    static constexpr const char* kTargetHeadPrefix = "head.pi.";
    static constexpr const char* kClassifierPrefix = "clf.";

    // Single-example inference, always in eval mode.
    Embedding encode(const TokenSequence& seq, std::span<const double> features = {}) const;
    CausalLatent reparameterize(const Embedding& emb, std::span<const double> noise) const;
    TargetLatent target_head(const Embedding& emb) const;
    RecombinedLatent recombine(const CausalLatent& c, const TargetLatent& t) const;
    SoftLabel classify_target(const TargetLatent& t) const;
    /// Hate probabilities (non-hate, hate) from c.sample. Requires
    /// HateInput::Causal.
    std::vector<double> hate_logits(const CausalLatent& c) const;

private:
    struct Linear {
        int w = -1;
        int b = -1;
    };
    struct Mlp {
        std::vector<Linear> layers;
    };
    struct Block {
        int ln1_g, ln1_b, ln2_g, ln2_b;
        Linear q, k, v, o, ff1, ff2;
    };

    void build(std::mt19937_64* rng);
    Linear linear(const std::string& name, int in, int out, std::mt19937_64* rng);
    Mlp mlp(const std::string& name, int in, int out, std::mt19937_64* rng);
    Block block(const std::string& name, int dim, int ffn, std::mt19937_64* rng);
    int tensor(const std::string& name, int rows, int cols, std::mt19937_64* rng, double init_std);

    Var apply(Tape& t, const Linear& l, Var x) const;
    Var apply(Tape& t, const Mlp& m, Var x) const;
    Var apply_block(Tape& t, const Block& b, Var x, int batch, int seq, int heads, bool causal,
                    const std::vector<std::uint8_t>& mask, const ForwardOptions& opts) const;
    Var pool(Tape& t, Var seq_out, const Batch& batch) const;
    Var sigma_of(Tape& t, Var pooled) const;
    void require_valid_tape(const Tape& t) const;

    ModelConfig config_;
    ParameterStore params_;

    int tok_emb_ = -1, pos_emb_ = -1, enc_ln_g_ = -1, enc_ln_b_ = -1;
    std::vector<Block> enc_blocks_;
    Mlp head_mu_, head_logvar_, head_pi_;
    Linear clf_, rec_, hate_;
    int dec_tok_emb_ = -1, dec_pos_emb_ = -1, dec_ln_g_ = -1, dec_ln_b_ = -1;
    Block dec_block_{};
    Linear lm_head_;
};

std::string backend_name(Backend b);
Backend parse_backend(const std::string& s);

}  // namespace hatewatch
