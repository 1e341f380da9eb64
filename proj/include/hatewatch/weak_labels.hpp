// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hatewatch/autodiff.hpp"
#include "hatewatch/data.hpp"
#include "hatewatch/taxonomy.hpp"
#include "hatewatch/types.hpp"

namespace hatewatch::weak {

enum class SourceKind { Lexicon, ExternalLlm, GoldPassthrough };

struct WeakLabelSource {
    SourceKind kind = SourceKind::Lexicon;
    std::string provenance;
};

std::string source_kind_name(SourceKind k);
SourceKind parse_source_kind(const std::string& s);

/// Throws ConfigError when gold passthrough is requested for a platform
/// without gold targets.
void check_source_allowed(SourceKind kind, const std::string& platform);

/// Keyword -> class index, keywords lower-cased single words.
class Lexicon {
public:
    Lexicon() = default;
    Lexicon(std::map<std::string, int> keywords, int n_classes);

    /// {"<class name>": ["kw", ...], ...}; class names resolved against the
    /// taxonomy.
    static Lexicon from_json(const nlohmann::json& j, const TargetTaxonomy& taxonomy);
    static Lexicon load(const std::filesystem::path& path, const TargetTaxonomy& taxonomy);

    bool empty() const { return keywords_.empty(); }
    int n_classes() const { return n_classes_; }
    const std::map<std::string, int>& keywords() const { return keywords_; }

private:
    std::map<std::string, int> keywords_;
    int n_classes_ = 0;
};

/// Normalized counts of matched keywords; uniform when nothing matches.
SoftLabel lexicon_label(const std::string& text, const TargetTaxonomy& taxonomy, const Lexicon& lexicon);

/// One-hot label from a gold target; uniform when the record has none.
SoftLabel gold_label(const data::ExampleRecord& record, const TargetTaxonomy& taxonomy);

/// Replaces the argmax class with a different class, chosen uniformly, for a
/// `rate` fraction of texts. Selection is a pure function of (text, seed).
/// Uniform labels are left unchanged.
SoftLabel corrupt_label(const SoftLabel& label, const std::string& text, double rate, std::uint64_t seed);

/// Transport-level failure of an external labeler.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sends one prompt, returns the raw completion text.
class LabelerClient {
public:
    virtual ~LabelerClient() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

struct FewShotExample {
    std::string post;
    std::string target;
};

/// Request text for one post.
std::string build_prompt(const std::string& post, const TargetTaxonomy& taxonomy,
                         const std::vector<FewShotExample>& examples = {});

/// Category named by a reply, or nullopt when it names none or several.
std::optional<int> parse_reply(const std::string& reply, const TargetTaxonomy& taxonomy);

/// Recorded request/response pairs. Lines are {"request": ..., "response":
/// ...} or {"post": ..., "response": ...}; the latter are expanded through
/// build_prompt with the given taxonomy and examples. Unknown requests fail
/// as transport errors.
class ReplayClient : public LabelerClient {
public:
    static ReplayClient load(const std::filesystem::path& path, const TargetTaxonomy& taxonomy,
                             const std::vector<FewShotExample>& examples = {});
    void add(const std::string& request, const std::string& response);
    std::string complete(const std::string& prompt) override;
    int calls() const { return calls_; }

private:
    std::map<std::string, std::string> replies_;
    int calls_ = 0;
};

struct HttpClientConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4";
    std::string api_key;
    int timeout_seconds = 60;
};

/// Environment variable holding the external labeler's API key.
inline constexpr const char* kApiKeyEnv = "HATEWATCH_LLM_API_KEY";

/// Chat-completions client. Constructing it without an API key throws
/// ConfigError naming kApiKeyEnv.
class HttpLabelerClient : public LabelerClient {
public:
    explicit HttpLabelerClient(HttpClientConfig config);
    std::string complete(const std::string& prompt) override;

private:
    HttpClientConfig config_;
};

struct LlmOptions {
    int retries = 2;
    std::vector<FewShotExample> examples;
};

struct LlmOutcome {
    SoftLabel label;
    std::string provenance;  // "llm", "llm-unparsed" or "lexicon-fallback"
    std::vector<std::string> warnings;
};

/// Asks the client for a category. Unparseable replies give a uniform label
/// with a warning; transport failures are retried, then the lexicon label is
/// used.
LlmOutcome llm_label(const std::string& text, const TargetTaxonomy& taxonomy, LabelerClient& client,
                     const Lexicon& fallback, const LlmOptions& options = {});

/// Self-training teacher schedule. Steps are 1-based counts of completed
/// optimizer steps.
struct PseudoLabelState {
    std::optional<ParameterStore> teacher_params;
    int refresh_period = 100;
    int step_of_last_refresh = 0;
    int refreshes = 0;

    bool due(int current_step) const { return current_step - step_of_last_refresh >= refresh_period; }
};

/// Replaces the snapshot with `current` iff the period has elapsed.
PseudoLabelState refresh_teacher(PseudoLabelState state, const ParameterStore& current, int current_step);

}  // namespace hatewatch::weak
