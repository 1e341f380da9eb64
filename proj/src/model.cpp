// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/model.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "hatewatch/errors.hpp"
#include "hatewatch/losses.hpp"

namespace hatewatch {

std::string backend_name(Backend b) { return b == Backend::Toy ? "toy" : "pretrained"; }

Backend parse_backend(const std::string& s) {
    if (s == "toy") return Backend::Toy;
    if (s == "pretrained") return Backend::Pretrained;
    throw ConfigError("backend must be 'toy' or 'pretrained', got '" + s + "'");
}

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw ConfigError(std::string("model.") + name + " must be positive");
    };
    positive(vocab_size, "vocab_size");
    positive(max_len, "max_len");
    positive(h_d, "h_d");
    positive(h_causal, "h_causal");
    positive(h_disc, "h_disc");
    positive(head_depth, "head_depth");
    positive(head_hidden, "head_hidden");
    positive(decoder_dim, "decoder_dim");
    positive(decoder_heads, "decoder_heads");
    positive(decoder_ffn, "decoder_ffn");
    if (n_classes < 2) throw ConfigError("model.n_classes must be at least 2");
    if (backend == Backend::Toy) {
        positive(layers, "layers");
        positive(heads, "heads");
        positive(ffn, "ffn");
        if (h_d % heads != 0) throw ConfigError("model.h_d must be divisible by model.heads");
    }
    if (decoder_dim % decoder_heads != 0) throw ConfigError("model.decoder_dim must be divisible by model.decoder_heads");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
    return {{"backend", backend_name(backend)},
            {"vocab_size", vocab_size},
            {"max_len", max_len},
            {"h_d", h_d},
            {"layers", layers},
            {"heads", heads},
            {"ffn", ffn},
            {"h_causal", h_causal},
            {"h_disc", h_disc},
            {"n_classes", n_classes},
            {"head_depth", head_depth},
            {"head_hidden", head_hidden},
            {"decoder_dim", decoder_dim},
            {"decoder_heads", decoder_heads},
            {"decoder_ffn", decoder_ffn},
            {"pooling", pooling == Pooling::FirstToken ? "first-token" : "mean"},
            {"hate_input", hate_input == HateInput::Causal ? "causal" : "pooled"},
            {"dropout", dropout}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    const auto known = c.to_json();
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key())) throw ConfigError("unknown config key 'model." + it.key() + "'");
    try {
        if (j.contains("backend")) c.backend = parse_backend(j.at("backend").get<std::string>());
        auto read_int = [&](const char* k, int& dst) {
            if (j.contains(k)) dst = j.at(k).get<int>();
        };
        read_int("vocab_size", c.vocab_size);
        read_int("max_len", c.max_len);
        read_int("h_d", c.h_d);
        read_int("layers", c.layers);
        read_int("heads", c.heads);
        read_int("ffn", c.ffn);
        read_int("h_causal", c.h_causal);
        read_int("h_disc", c.h_disc);
        read_int("n_classes", c.n_classes);
        read_int("head_depth", c.head_depth);
        read_int("head_hidden", c.head_hidden);
        read_int("decoder_dim", c.decoder_dim);
        read_int("decoder_heads", c.decoder_heads);
        read_int("decoder_ffn", c.decoder_ffn);
        if (j.contains("pooling")) {
            const auto p = j.at("pooling").get<std::string>();
            if (p == "first-token") c.pooling = Pooling::FirstToken;
            else if (p == "mean") c.pooling = Pooling::Mean;
            else throw ConfigError("model.pooling must be 'first-token' or 'mean'");
        }
        if (j.contains("hate_input")) {
            const auto h = j.at("hate_input").get<std::string>();
            if (h == "causal") c.hate_input = HateInput::Causal;
            else if (h == "pooled") c.hate_input = HateInput::Pooled;
            else throw ConfigError("model.hate_input must be 'causal' or 'pooled'");
        }
        if (j.contains("dropout")) c.dropout = j.at("dropout").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    return c;
}

FeatureTable FeatureTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open feature file " + path.string());
    FeatureTable table;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            table.add(j.at("text").get<std::string>(), j.at("vector").get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return table;
}

void FeatureTable::add(const std::string& text, std::vector<double> vector) {
    if (vector.empty()) throw DataError("empty feature vector");
    if (dim_ == 0) dim_ = static_cast<int>(vector.size());
    if (static_cast<int>(vector.size()) != dim_)
        throw DataError("feature vector of dimension " + std::to_string(vector.size()) + ", expected " +
                        std::to_string(dim_));
    for (double v : vector)
        if (!std::isfinite(v)) throw DataError("non-finite feature value");
    rows_[text] = std::move(vector);
}

std::span<const double> FeatureTable::lookup(const std::string& text) const {
    auto it = rows_.find(text);
    if (it == rows_.end()) throw DataError("no precomputed features for text '" + text.substr(0, 40) + "'");
    return it->second;
}

Batch Batch::collate(std::span<const TokenSequence> seqs) {
    Batch b;
    b.size = static_cast<int>(seqs.size());
    for (const auto& s : seqs) b.seq = std::max(b.seq, static_cast<int>(s.size()));
    b.ids.assign(static_cast<std::size_t>(b.size) * b.seq, 0);
    b.mask.assign(b.ids.size(), 0);
    for (int i = 0; i < b.size; ++i) {
        const auto& s = seqs[static_cast<std::size_t>(i)];
        if (s.token_ids.empty()) throw DataError("empty token sequence in batch");
        if (s.attention_mask.size() != s.token_ids.size()) throw DataError("mask length differs from id length");
        for (std::size_t p = 0; p < s.size(); ++p) {
            b.ids[static_cast<std::size_t>(i) * b.seq + p] = s.token_ids[p];
            b.mask[static_cast<std::size_t>(i) * b.seq + p] = s.attention_mask[p] ? 1 : 0;
        }
    }
    return b;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(seed);
    build(&rng);
}

Model::Model(const ModelConfig& config, ParameterStore params) : config_(config) {
    config_.validate();
    build(nullptr);
    params_.assign_values(params);
}

int Model::tensor(const std::string& name, int rows, int cols, std::mt19937_64* rng, double init_std) {
    Matrix m(rows, cols);
    if (rng != nullptr && init_std > 0.0) {
        std::normal_distribution<double> n(0.0, init_std);
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = n(*rng);
    }
    return params_.add(name, std::move(m));
}

Model::Linear Model::linear(const std::string& name, int in, int out, std::mt19937_64* rng) {
    Linear l;
    l.w = tensor(name + ".w", in, out, rng, std::sqrt(2.0 / (in + out)));
    l.b = tensor(name + ".b", 1, out, nullptr, 0.0);
    return l;
}

Model::Mlp Model::mlp(const std::string& name, int in, int out, std::mt19937_64* rng) {
    Mlp m;
    for (int d = 0; d < config_.head_depth; ++d) {
        const int from = d == 0 ? in : config_.head_hidden;
        const int to = d + 1 == config_.head_depth ? out : config_.head_hidden;
        m.layers.push_back(linear(name + "." + std::to_string(d), from, to, rng));
    }
    return m;
}

Model::Block Model::block(const std::string& name, int dim, int ffn, std::mt19937_64* rng) {
    Block b;
    b.ln1_g = params_.add(name + ".ln1.g", Matrix(1, dim, 1.0));
    b.ln1_b = params_.add(name + ".ln1.b", Matrix(1, dim));
    b.q = linear(name + ".q", dim, dim, rng);
    b.k = linear(name + ".k", dim, dim, rng);
    b.v = linear(name + ".v", dim, dim, rng);
    b.o = linear(name + ".o", dim, dim, rng);
    b.ln2_g = params_.add(name + ".ln2.g", Matrix(1, dim, 1.0));
    b.ln2_b = params_.add(name + ".ln2.b", Matrix(1, dim));
    b.ff1 = linear(name + ".ff1", dim, ffn, rng);
    b.ff2 = linear(name + ".ff2", ffn, dim, rng);
    return b;
}

void Model::build(std::mt19937_64* rng) {
    const auto& c = config_;
    int feat = c.h_d;
    if (c.backend == Backend::Toy) {
        tok_emb_ = tensor("enc.tok_emb", c.vocab_size, c.h_d, rng, 0.02);
        pos_emb_ = tensor("enc.pos_emb", c.max_len, c.h_d, rng, 0.02);
        for (int l = 0; l < c.layers; ++l) enc_blocks_.push_back(block("enc.l" + std::to_string(l), c.h_d, c.ffn, rng));
        enc_ln_g_ = params_.add("enc.ln.g", Matrix(1, c.h_d, 1.0));
        enc_ln_b_ = params_.add("enc.ln.b", Matrix(1, c.h_d));
    }
    head_mu_ = mlp("head.mu", feat, c.h_causal, rng);
    head_logvar_ = mlp("head.logvar", feat, c.h_causal, rng);
    head_pi_ = mlp("head.pi", feat, c.h_disc, rng);
    clf_ = linear("clf", c.h_disc, c.n_classes, rng);
    rec_ = linear("rec", c.h_causal + c.h_disc, c.decoder_dim, rng);
    dec_tok_emb_ = tensor("dec.tok_emb", c.vocab_size, c.decoder_dim, rng, 0.02);
    dec_pos_emb_ = tensor("dec.pos_emb", c.max_len, c.decoder_dim, rng, 0.02);
    dec_block_ = block("dec.l0", c.decoder_dim, c.decoder_ffn, rng);
    dec_ln_g_ = params_.add("dec.ln.g", Matrix(1, c.decoder_dim, 1.0));
    dec_ln_b_ = params_.add("dec.ln.b", Matrix(1, c.decoder_dim));
    lm_head_ = linear("dec.lm", c.decoder_dim, c.vocab_size, rng);
    hate_ = linear("hate", c.hate_input == HateInput::Causal ? c.h_causal : feat, 2, rng);
}

Var Model::apply(Tape& t, const Linear& l, Var x) const {
    return ad::add_row(t, ad::matmul(t, x, t.param(l.w)), t.param(l.b));
}

Var Model::apply(Tape& t, const Mlp& m, Var x) const {
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        if (i > 0) x = ad::gelu(t, x);
        x = apply(t, m.layers[i], x);
    }
    return x;
}

Var Model::apply_block(Tape& t, const Block& b, Var x, int batch, int seq, int heads, bool causal,
                       const std::vector<std::uint8_t>& mask, const ForwardOptions& opts) const {
    const int dim = t.value(x).cols();
    const double p = opts.train ? config_.dropout : 0.0;
    Var h = ad::layernorm(t, x, t.param(b.ln1_g), t.param(b.ln1_b));
    kernels::AttentionShape shape{batch, seq, heads, dim / heads, causal};
    Var a = ad::attention(t, apply(t, b.q, h), apply(t, b.k, h), apply(t, b.v, h), shape, mask);
    Var o = apply(t, b.o, a);
    if (p > 0.0) o = ad::dropout(t, o, p, *opts.rng);
    x = ad::add(t, x, o);
    Var h2 = ad::layernorm(t, x, t.param(b.ln2_g), t.param(b.ln2_b));
    Var f = apply(t, b.ff2, ad::gelu(t, apply(t, b.ff1, h2)));
    if (p > 0.0) f = ad::dropout(t, f, p, *opts.rng);
    return ad::add(t, x, f);
}

Var Model::pool(Tape& t, Var seq_out, const Batch& batch) const {
    if (config_.pooling == Pooling::Mean) return ad::masked_mean_rows(t, seq_out, batch.seq, batch.mask);
    std::vector<int> first(static_cast<std::size_t>(batch.size));
    for (int i = 0; i < batch.size; ++i) first[static_cast<std::size_t>(i)] = i * batch.seq;
    return ad::gather_rows(t, seq_out, first);
}

Var Model::sigma_of(Tape& t, Var pooled) const {
    return ad::exp(t, ad::scale(t, apply(t, head_logvar_, pooled), 0.5));
}

void Model::require_valid_tape(const Tape& t) const {
    const ParameterStore* store = t.params();
    if (store == nullptr || store->size() != params_.size())
        throw std::logic_error("forward: tape is not bound to a store of this model's layout");
}

ForwardVars Model::forward(Tape& t, const Batch& batch, const ForwardOptions& opts) const {
    require_valid_tape(t);
    if (opts.train && config_.dropout > 0.0 && opts.rng == nullptr)
        throw std::logic_error("forward: training mode needs an rng");
    if (batch.size < 1) throw DataError("forward: empty batch");
    if (batch.seq > config_.max_len)
        throw LengthError("sequence of length " + std::to_string(batch.seq) + " exceeds max_len " +
                          std::to_string(config_.max_len));
    for (int id : batch.ids)
        if (id < 0 || id >= config_.vocab_size)
            throw DataError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(config_.vocab_size));
    const auto& c = config_;
    ForwardVars out;

    std::vector<int> positions(batch.ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i % static_cast<std::size_t>(batch.seq));

    if (c.backend == Backend::Toy) {
        Var x = ad::add(t, ad::embedding(t, t.param(tok_emb_), batch.ids), ad::embedding(t, t.param(pos_emb_), positions));
        for (const auto& b : enc_blocks_) x = apply_block(t, b, x, batch.size, batch.seq, c.heads, false, batch.mask, opts);
        out.sequence = ad::layernorm(t, x, t.param(enc_ln_g_), t.param(enc_ln_b_));
        out.pooled = pool(t, out.sequence, batch);
    } else {
        if (batch.features.rows() != batch.size || batch.features.cols() != c.h_d)
            throw DataError("pretrained backend needs a " + std::to_string(batch.size) + "x" + std::to_string(c.h_d) +
                            " feature matrix, got " + batch.features.shape_str());
        out.pooled = t.constant(batch.features);
        if (opts.train && c.dropout > 0.0) out.pooled = ad::dropout(t, out.pooled, c.dropout, *opts.rng);
    }

    out.mu = apply(t, head_mu_, out.pooled);
    out.sigma = sigma_of(t, out.pooled);
    if (opts.noise.empty()) {
        out.sample = out.mu;
    } else {
        if (opts.noise.rows() != batch.size || opts.noise.cols() != c.h_causal)
            throw ConfigError("noise must be " + std::to_string(batch.size) + "x" + std::to_string(c.h_causal));
        out.sample = ad::add(t, out.mu, ad::mul(t, out.sigma, t.constant(opts.noise)));
    }

    if (opts.target || opts.decode) {
        out.target = apply(t, head_pi_, out.pooled);
        if (!opts.target_offset.empty()) {
            if (opts.target_offset.rows() != batch.size || opts.target_offset.cols() != c.h_disc)
                throw ConfigError("target_offset must be " + std::to_string(batch.size) + "x" + std::to_string(c.h_disc));
            out.target = ad::add(t, out.target, t.constant(opts.target_offset));
        }
        out.target_probs = ad::softmax_rows(t, apply(t, clf_, out.target));
    }

    if (opts.decode) {
        out.recombined = apply(t, rec_, ad::concat_cols(t, out.sample, out.target));
        // Row 0 of each sequence is the conditioning state, row p > 0 embeds
        // token p - 1 (teacher forcing).
        const int s = batch.seq;
        std::vector<int> prev;
        prev.reserve(static_cast<std::size_t>(batch.size) * static_cast<std::size_t>(std::max(0, s - 1)));
        for (int b = 0; b < batch.size; ++b)
            for (int p = 1; p < s; ++p) prev.push_back(batch.ids[static_cast<std::size_t>(b * s + p - 1)]);
        Var stacked = out.recombined;
        if (!prev.empty()) stacked = ad::concat_rows(t, out.recombined, ad::embedding(t, t.param(dec_tok_emb_), prev));
        std::vector<int> order(static_cast<std::size_t>(batch.size) * s);
        for (int b = 0; b < batch.size; ++b)
            for (int p = 0; p < s; ++p)
                order[static_cast<std::size_t>(b * s + p)] = p == 0 ? b : batch.size + b * (s - 1) + (p - 1);
        Var d = ad::add(t, ad::gather_rows(t, stacked, order), ad::embedding(t, t.param(dec_pos_emb_), positions));
        d = apply_block(t, dec_block_, d, batch.size, s, c.decoder_heads, true, batch.mask, opts);
        d = ad::layernorm(t, d, t.param(dec_ln_g_), t.param(dec_ln_b_));
        out.recon_probs = ad::softmax_rows(t, apply(t, lm_head_, d));
    }

    Var hate_in = c.hate_input == HateInput::Causal ? out.sample : out.pooled;
    out.hate_probs = ad::softmax_rows(t, apply(t, hate_, hate_in));
    return out;
}

namespace {

std::vector<double> row0(const Matrix& m) { return std::vector<double>(m.row(0).begin(), m.row(0).end()); }

void require_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw NumericError(what, "non-finite network output");
}

}  // namespace

Embedding Model::encode(const TokenSequence& seq, std::span<const double> features) const {
    if (seq.token_ids.empty()) throw DataError("encode: empty sequence");
    if (static_cast<int>(seq.size()) > config_.max_len)
        throw LengthError("sequence of length " + std::to_string(seq.size()) + " exceeds max_len " +
                          std::to_string(config_.max_len));
    Batch b = Batch::collate(std::span<const TokenSequence>(&seq, 1));
    Embedding e;
    if (config_.backend == Backend::Pretrained) {
        if (static_cast<int>(features.size()) != config_.h_d) throw DataError("encode: feature vector has wrong dimension");
        e.pooled.assign(features.begin(), features.end());
        e.sequence = Matrix::row_vector(features);
        return e;
    }
    Tape t = Tape::inference(params_);
    ForwardOptions opts;
    opts.decode = false;
    opts.target = false;
    auto v = forward(t, b, opts);
    e.sequence = t.value(v.sequence);
    e.pooled = row0(t.value(v.pooled));
    require_finite(e.pooled, "embedding");
    return e;
}

CausalLatent Model::reparameterize(const Embedding& emb, std::span<const double> noise) const {
    if (static_cast<int>(noise.size()) != config_.h_causal)
        throw ConfigError("noise has dimension " + std::to_string(noise.size()) + ", expected " +
                          std::to_string(config_.h_causal));
    if (static_cast<int>(emb.pooled.size()) != config_.h_d) throw ConfigError("embedding has wrong dimension");
    Tape t = Tape::inference(params_);
    Var x = t.constant(Matrix::row_vector(emb.pooled));
    CausalLatent c;
    c.mu = row0(t.value(apply(t, head_mu_, x)));
    c.sigma = row0(t.value(sigma_of(t, x)));
    require_finite(c.mu, "mu");
    require_finite(c.sigma, "sigma");
    c.sample.resize(c.mu.size());
    for (std::size_t k = 0; k < c.mu.size(); ++k) c.sample[k] = c.mu[k] + c.sigma[k] * noise[k];
    return c;
}

TargetLatent Model::target_head(const Embedding& emb) const {
    if (static_cast<int>(emb.pooled.size()) != config_.h_d) throw ConfigError("embedding has wrong dimension");
    Tape t = Tape::inference(params_);
    TargetLatent out{row0(t.value(apply(t, head_pi_, t.constant(Matrix::row_vector(emb.pooled)))))};
    require_finite(out.vector, "target latent");
    return out;
}

RecombinedLatent Model::recombine(const CausalLatent& c, const TargetLatent& tl) const {
    if (static_cast<int>(c.sample.size()) != config_.h_causal || static_cast<int>(tl.vector.size()) != config_.h_disc)
        throw ConfigError("recombine: latent dimensions do not match the model");
    std::vector<double> joined = c.sample;
    joined.insert(joined.end(), tl.vector.begin(), tl.vector.end());
    Tape t = Tape::inference(params_);
    return RecombinedLatent{row0(t.value(apply(t, rec_, t.constant(Matrix::row_vector(joined)))))};
}

SoftLabel Model::classify_target(const TargetLatent& tl) const {
    if (static_cast<int>(tl.vector.size()) != config_.h_disc) throw ConfigError("classify_target: wrong latent dimension");
    Tape t = Tape::inference(params_);
    Var p = ad::softmax_rows(t, apply(t, clf_, t.constant(Matrix::row_vector(tl.vector))));
    return losses::make_soft_label(row0(t.value(p)));
}

std::vector<double> Model::hate_logits(const CausalLatent& c) const {
    if (config_.hate_input != HateInput::Causal) throw ConfigError("hate_logits: model reads the pooled embedding");
    if (static_cast<int>(c.sample.size()) != config_.h_causal) throw ConfigError("hate_logits: wrong latent dimension");
    Tape t = Tape::inference(params_);
    Var p = ad::softmax_rows(t, apply(t, hate_, t.constant(Matrix::row_vector(c.sample))));
    return row0(t.value(p));
}

}  // namespace hatewatch
