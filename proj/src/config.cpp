// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "hatewatch/errors.hpp"

namespace hatewatch {

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void TrainConfig::validate() const {
    auto nonneg = [](double v, const char* key) {
        if (!(v >= 0.0)) throw ConfigError(std::string(key) + " must be non-negative");
    };
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    nonneg(alpha_t, "alpha_t");
    nonneg(alpha_c, "alpha_c");
    nonneg(delta_cont, "delta_cont");
    nonneg(delta_conf, "delta_conf");
    nonneg(weight_decay, "weight_decay");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
    if (patience < 1) throw ConfigError("patience must be positive");
    if (eval_every < 1) throw ConfigError("eval_every must be positive");
    if (refresh_period < 1) throw ConfigError("refresh_period must be positive");
    if (min_count < 1) throw ConfigError("min_count must be positive");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
    if (!(weak_noise >= 0.0 && weak_noise <= 1.0)) throw ConfigError("weak_noise must lie in [0, 1]");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0))
        throw ConfigError("adam_beta1, adam_beta2 must lie in [0, 1) and adam_eps must be positive");
    if (weak_source != "lexicon" && weak_source != "llm" && weak_source != "gold")
        throw ConfigError("weak_source must be lexicon, llm or gold");
    if (model.backend == Backend::Pretrained && features.empty())
        throw ConfigError("features must name a feature file for the pretrained backend");
    ModelConfig m = model;
    m.vocab_size = std::max(1, m.vocab_size);  // derived from the corpus later
    m.validate();
}

nlohmann::json TrainConfig::to_json() const {
    auto m = model.to_json();
    m.erase("dropout");
    m.erase("vocab_size");
    return {{"lr", lr},
            {"dropout", dropout},
            {"alpha_t", alpha_t},
            {"alpha_c", alpha_c},
            {"delta_cont", delta_cont},
            {"delta_conf", delta_conf},
            {"eta", eta},
            {"beta", beta},
            {"batch_size", batch_size},
            {"max_steps", max_steps},
            {"patience", patience},
            {"eval_every", eval_every},
            {"seed", seed},
            {"adam_beta1", adam_beta1},
            {"adam_beta2", adam_beta2},
            {"adam_eps", adam_eps},
            {"weight_decay", weight_decay},
            {"val_fraction", val_fraction},
            {"refresh_period", refresh_period},
            {"min_count", min_count},
            {"weak_source", weak_source},
            {"weak_noise", weak_noise},
            {"lexicon", lexicon},
            {"features", features},
            {"model", m}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    TrainConfig c;
    const auto known = c.to_json();
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");
    try {
        auto rd = [&](const char* k, double& dst) {
            if (j.contains(k)) dst = j.at(k).get<double>();
        };
        auto ri = [&](const char* k, int& dst) {
            if (j.contains(k)) dst = j.at(k).get<int>();
        };
        auto rs = [&](const char* k, std::string& dst) {
            if (j.contains(k)) dst = j.at(k).get<std::string>();
        };
        rd("lr", c.lr);
        rd("dropout", c.dropout);
        rd("alpha_t", c.alpha_t);
        rd("alpha_c", c.alpha_c);
        rd("delta_cont", c.delta_cont);
        rd("delta_conf", c.delta_conf);
        rd("eta", c.eta);
        rd("beta", c.beta);
        ri("batch_size", c.batch_size);
        ri("max_steps", c.max_steps);
        ri("patience", c.patience);
        ri("eval_every", c.eval_every);
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        rd("adam_beta1", c.adam_beta1);
        rd("adam_beta2", c.adam_beta2);
        rd("adam_eps", c.adam_eps);
        rd("weight_decay", c.weight_decay);
        rd("val_fraction", c.val_fraction);
        ri("refresh_period", c.refresh_period);
        ri("min_count", c.min_count);
        rs("weak_source", c.weak_source);
        rd("weak_noise", c.weak_noise);
        rs("lexicon", c.lexicon);
        rs("features", c.features);
        if (j.contains("model")) {
            const auto& m = j.at("model");
            if (m.contains("dropout")) throw ConfigError("unknown config key 'model.dropout' (use top-level dropout)");
            if (m.contains("vocab_size")) throw ConfigError("unknown config key 'model.vocab_size' (derived from data)");
            c.model = ModelConfig::from_json(m);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.model.dropout = c.dropout;
    c.validate();
    return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return from_json(j);
}

std::string TrainConfig::hash() const { return fnv1a_hex(to_json().dump()); }

}  // namespace hatewatch
