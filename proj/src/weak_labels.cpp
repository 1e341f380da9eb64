// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/weak_labels.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "hatewatch/errors.hpp"
#include "hatewatch/losses.hpp"
#include "hatewatch/tokenizer.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace hatewatch::weak {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

SoftLabel uniform(int c) { return losses::make_soft_label(std::vector<double>(static_cast<std::size_t>(c), 1.0 / c)); }

SoftLabel one_hot(int c, int k) {
    std::vector<double> p(static_cast<std::size_t>(c), 0.0);
    p[static_cast<std::size_t>(k)] = 1.0;
    return losses::make_soft_label(std::move(p));
}

// FNV-1a; stable across platforms, unlike std::hash.
std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
    std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

double unit_interval(std::uint64_t h) {
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace

std::string source_kind_name(SourceKind k) {
    switch (k) {
        case SourceKind::Lexicon: return "lexicon";
        case SourceKind::ExternalLlm: return "llm";
        case SourceKind::GoldPassthrough: return "gold";
    }
    return "?";
}

SourceKind parse_source_kind(const std::string& s) {
    const std::string k = lower(s);
    if (k == "lexicon") return SourceKind::Lexicon;
    if (k == "llm" || k == "external-llm") return SourceKind::ExternalLlm;
    if (k == "gold" || k == "gold-passthrough") return SourceKind::GoldPassthrough;
    throw ConfigError("weak-label source must be lexicon, llm or gold, got '" + s + "'");
}

void check_source_allowed(SourceKind kind, const std::string& platform) {
    if (kind == SourceKind::GoldPassthrough && !data::platform_has_targets(platform))
        throw ConfigError("gold target labels are not available for platform " + platform);
}

Lexicon::Lexicon(std::map<std::string, int> keywords, int n_classes) : n_classes_(n_classes) {
    if (n_classes < 2) throw ConfigError("lexicon needs at least two classes");
    for (auto& [word, cls] : keywords) {
        if (cls < 0 || cls >= n_classes) throw ConfigError("lexicon keyword '" + word + "' maps outside the taxonomy");
        keywords_[lower(word)] = cls;
    }
}

Lexicon Lexicon::from_json(const nlohmann::json& j, const TargetTaxonomy& taxonomy) {
    if (!j.is_object()) throw ConfigError("lexicon must be an object of class -> keyword list");
    std::map<std::string, int> kw;
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto cls = taxonomy.index_of(it.key());
        if (!cls) throw ConfigError("lexicon class '" + it.key() + "' is not in the taxonomy");
        for (const auto& w : it.value()) {
            const std::string word = lower(w.get<std::string>());
            if (auto prev = kw.find(word); prev != kw.end() && prev->second != *cls)
                throw ConfigError("lexicon keyword '" + word + "' is listed under two classes");
            kw[word] = *cls;
        }
    }
    return Lexicon(std::move(kw), taxonomy.size());
}

Lexicon Lexicon::load(const std::filesystem::path& path, const TargetTaxonomy& taxonomy) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open lexicon " + path.string());
    try {
        return from_json(nlohmann::json::parse(in), taxonomy);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("lexicon " + path.string() + ": " + e.what());
    }
}

SoftLabel lexicon_label(const std::string& text, const TargetTaxonomy& taxonomy, const Lexicon& lexicon) {
    if (lexicon.empty()) throw ConfigError("lexicon is empty");
    if (lexicon.n_classes() != taxonomy.size()) throw ConfigError("lexicon and taxonomy disagree on class count");
    std::vector<double> counts(static_cast<std::size_t>(taxonomy.size()), 0.0);
    double hits = 0.0;
    for (const auto& w : split_words(text))
        if (auto it = lexicon.keywords().find(w); it != lexicon.keywords().end()) {
            counts[static_cast<std::size_t>(it->second)] += 1.0;
            hits += 1.0;
        }
    if (hits == 0.0) return uniform(taxonomy.size());
    for (double& c : counts) c /= hits;
    return losses::make_soft_label(std::move(counts));
}

SoftLabel gold_label(const data::ExampleRecord& record, const TargetTaxonomy& taxonomy) {
    if (!record.gold_target) return uniform(taxonomy.size());
    auto k = taxonomy.index_of(*record.gold_target);
    if (!k) throw DataError("record " + record.id + ": gold target '" + *record.gold_target + "' is not in the taxonomy");
    return one_hot(taxonomy.size(), *k);
}

SoftLabel corrupt_label(const SoftLabel& label, const std::string& text, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("noise rate must lie in [0, 1]");
    const int c = static_cast<int>(label.probs.size());
    if (c < 2 || label.confidence <= 0.0) return label;
    const std::uint64_t h = fnv1a(text, seed);
    if (unit_interval(h) >= rate) return label;
    const int k = losses::argmax(label.probs);
    int wrong = static_cast<int>(unit_interval(h ^ 0xA5A5A5A5A5A5A5A5ULL) * (c - 1));
    if (wrong >= k) ++wrong;
    return one_hot(c, wrong);
}

std::string build_prompt(const std::string& post, const TargetTaxonomy& taxonomy,
                         const std::vector<FewShotExample>& examples) {
    std::string categories;
    const auto& names = taxonomy.classes();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) categories += names.size() > 2 ? ", " : " ";
        if (i + 1 == names.size() && names.size() > 1) categories += "and ";
        categories += names[i];
    }
    std::string shots;
    if (examples.empty()) {
        shots = "...";
    } else {
        for (const auto& e : examples) shots += "\nPost: " + e.post + "\nTarget group: " + e.target;
    }
    return "The following examples show the post and the target group being talked about in the post. Examples: " +
           shots +
           "\nNow, given the following posts, identify the main target group of the post. The target category of "
           "the post refers to the entity being talked about in the post. The possible categories are " +
           categories + ".\nPost: " + post + "\nTarget group:";
}

std::optional<int> parse_reply(const std::string& reply, const TargetTaxonomy& taxonomy) {
    std::string r = lower(reply);
    for (const char* prefix : {"target group:", "category:", "target:"}) {
        auto pos = r.find(prefix);
        if (pos != std::string::npos) r = r.substr(pos + std::char_traits<char>::length(prefix));
    }
    auto strip = [](std::string s) {
        auto junk = [](unsigned char c) { return std::isspace(c) || c == '"' || c == '\'' || c == '.' || c == '*'; };
        while (!s.empty() && junk(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
        while (!s.empty() && junk(static_cast<unsigned char>(s.back()))) s.pop_back();
        return s;
    };
    r = strip(r);
    if (auto k = taxonomy.index_of(r)) return k;
    // Otherwise accept a reply that names exactly one category as whole words.
    std::optional<int> found;
    for (int k = 0; k < taxonomy.size(); ++k) {
        const std::string name = lower(taxonomy.name(k));
        for (auto pos = r.find(name); pos != std::string::npos; pos = r.find(name, pos + 1)) {
            const bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(r[pos - 1]));
            const std::size_t end = pos + name.size();
            const bool right = end == r.size() || !std::isalnum(static_cast<unsigned char>(r[end]));
            if (left && right) {
                if (found && *found != k) return std::nullopt;
                found = k;
                break;
            }
        }
    }
    return found;
}

ReplayClient ReplayClient::load(const std::filesystem::path& path, const TargetTaxonomy& taxonomy,
                                const std::vector<FewShotExample>& examples) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open replay file " + path.string());
    ReplayClient client;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            const std::string response = j.at("response").get<std::string>();
            if (j.contains("request")) client.add(j.at("request").get<std::string>(), response);
            else client.add(build_prompt(j.at("post").get<std::string>(), taxonomy, examples), response);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return client;
}

void ReplayClient::add(const std::string& request, const std::string& response) { replies_[request] = response; }

std::string ReplayClient::complete(const std::string& prompt) {
    ++calls_;
    auto it = replies_.find(prompt);
    if (it == replies_.end()) throw TransportError("no recorded reply for this request");
    return it->second;
}

HttpLabelerClient::HttpLabelerClient(HttpClientConfig config) : config_(std::move(config)) {
    if (config_.api_key.empty())
        throw ConfigError(std::string("live labeling needs an API key in the ") + kApiKeyEnv +
                          " environment variable; use --replay <file> for offline runs");
}

std::string HttpLabelerClient::complete(const std::string& prompt) {
    httplib::Client cli(config_.base_url);
    cli.set_connection_timeout(config_.timeout_seconds, 0);
    cli.set_read_timeout(config_.timeout_seconds, 0);
    cli.set_bearer_token_auth(config_.api_key);
    const nlohmann::json body = {{"model", config_.model},
                                 {"temperature", 0},
                                 {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
    auto res = cli.Post(config_.path, body.dump(), "application/json");
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("HTTP " + std::to_string(res->status));
    try {
        return nlohmann::json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("unexpected response body: ") + e.what());
    }
}

LlmOutcome llm_label(const std::string& text, const TargetTaxonomy& taxonomy, LabelerClient& client,
                     const Lexicon& fallback, const LlmOptions& options) {
    LlmOutcome out;
    const std::string prompt = build_prompt(text, taxonomy, options.examples);
    for (int attempt = 0; attempt <= options.retries; ++attempt) {
        std::string reply;
        try {
            reply = client.complete(prompt);
        } catch (const TransportError& e) {
            out.warnings.push_back("attempt " + std::to_string(attempt + 1) + ": " + e.what());
            continue;
        }
        if (auto k = parse_reply(reply, taxonomy)) {
            out.label = one_hot(taxonomy.size(), *k);
            out.provenance = "llm";
        } else {
            out.label = uniform(taxonomy.size());
            out.provenance = "llm-unparsed";
            out.warnings.push_back("unparseable reply '" + reply.substr(0, 60) + "'");
        }
        return out;
    }
    out.warnings.push_back("falling back to lexicon");
    out.label = lexicon_label(text, taxonomy, fallback);
    out.provenance = "lexicon-fallback";
    return out;
}

PseudoLabelState refresh_teacher(PseudoLabelState state, const ParameterStore& current, int current_step) {
    if (state.refresh_period < 1) throw ConfigError("refresh_period must be positive");
    if (state.due(current_step)) {
        state.teacher_params = current;
        state.step_of_last_refresh = current_step;
        ++state.refreshes;
    }
    return state;
}

}  // namespace hatewatch::weak
