// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "hatewatch/csv.hpp"
#include "hatewatch/errors.hpp"

namespace hatewatch::data {

namespace {

std::string lower_trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string json_scalar_to_string(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) {
        const double d = v.get<double>();
        if (d == std::floor(d)) return std::to_string(static_cast<long long>(d));
        return v.dump();
    }
    if (v.is_null()) return "";
    return v.dump();
}

const std::map<std::string, int>& binary_map() {
    static const std::map<std::string, int> m = {{"0", 0}, {"1", 1}, {"false", 0}, {"true", 1}};
    return m;
}

}  // namespace

Platform parse_platform(const std::string& name) {
    const std::string key = lower_trim(name);
    if (key == "gab") return Platform::GAB;
    if (key == "reddit") return Platform::Reddit;
    if (key == "x" || key == "twitter") return Platform::X;
    if (key == "youtube") return Platform::YouTube;
    if (key.rfind("synthetic", 0) == 0) return Platform::Synthetic;
    throw ConfigError("unknown platform '" + name + "' (expected GAB, Reddit, X, YouTube or synthetic-*)");
}

std::string platform_name(Platform p) {
    switch (p) {
        case Platform::GAB: return "GAB";
        case Platform::Reddit: return "Reddit";
        case Platform::X: return "X";
        case Platform::YouTube: return "YouTube";
        case Platform::Synthetic: return "synthetic";
    }
    return "?";
}

bool platform_has_targets(Platform p) {
    return p == Platform::GAB || p == Platform::YouTube || p == Platform::Synthetic;
}

bool platform_has_targets(const std::string& name) { return platform_has_targets(parse_platform(name)); }

nlohmann::json CorpusSummary::to_json() const {
    return {{"n_posts", n_posts}, {"n_hateful", n_hateful}, {"hate_pct", hate_pct}, {"has_targets", has_targets}};
}

CorpusSummary summarize(const std::vector<ExampleRecord>& records, bool has_targets) {
    CorpusSummary s;
    s.n_posts = static_cast<std::int64_t>(records.size());
    for (const auto& r : records) s.n_hateful += r.hate;
    s.hate_pct = s.n_posts > 0 ? 100.0 * static_cast<double>(s.n_hateful) / static_cast<double>(s.n_posts) : 0.0;
    s.has_targets = has_targets;
    return s;
}

AdapterConfig AdapterConfig::defaults(Platform p) {
    AdapterConfig a;
    switch (p) {
        case Platform::GAB:
        case Platform::YouTube:
            a.label_map = binary_map();
            a.target_column = "target";
            break;
        case Platform::Reddit:
            // Ordinal slur-usage labels: only the derogatory class is hateful.
            a.text_column = "body";
            a.label_column = "gold_label";
            a.label_map = {{"deg", 1}, {"ndg", 0}, {"hom", 0}, {"apr", 0}};
            break;
        case Platform::X:
            // Hate and Offensive are hateful, Neither is not; numeric codes 0/1/2
            // follow the same order in the public release.
            a.text_column = "tweet";
            a.label_column = "class";
            a.label_map = {{"hate", 1}, {"offensive", 1}, {"neither", 0}, {"0", 1}, {"1", 1}, {"2", 0}};
            break;
        case Platform::Synthetic:
            a.format = Format::Jsonl;
            a.label_column = "hate";
            a.target_column = "gold_target";
            a.label_map = binary_map();
            break;
    }
    return a;
}

AdapterConfig AdapterConfig::from_json(const nlohmann::json& j, Platform p) {
    AdapterConfig a = defaults(p);
    static const std::set<std::string> known = {"format", "id_column", "text_column", "label_column", "target_column",
                                                "label_map"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw ConfigError("unknown adapter key '" + it.key() + "'");
    if (j.contains("format")) {
        const std::string f = lower_trim(j.at("format").get<std::string>());
        if (f == "csv") a.format = Format::Csv;
        else if (f == "tsv") a.format = Format::Tsv;
        else if (f == "jsonl") a.format = Format::Jsonl;
        else throw ConfigError("adapter format must be csv, tsv or jsonl");
    }
    if (j.contains("id_column")) a.id_column = j.at("id_column").get<std::string>();
    if (j.contains("text_column")) a.text_column = j.at("text_column").get<std::string>();
    if (j.contains("label_column")) a.label_column = j.at("label_column").get<std::string>();
    if (j.contains("target_column")) a.target_column = j.at("target_column").get<std::string>();
    if (j.contains("label_map")) {
        a.label_map.clear();
        for (auto it = j.at("label_map").begin(); it != j.at("label_map").end(); ++it) {
            const int v = it.value().get<int>();
            if (v != 0 && v != 1) throw ConfigError("label_map values must be 0 or 1");
            a.label_map[lower_trim(it.key())] = v;
        }
    }
    return a;
}

namespace {

// Turns one parsed row into a record, or records why it was dropped.
void ingest_row(const std::map<std::string, std::string>& row, std::int64_t line, Platform platform,
                const AdapterConfig& a, LoadResult& out) {
    auto text_it = row.find(a.text_column);
    auto label_it = row.find(a.label_column);
    if (text_it == row.end() || label_it == row.end()) {
        ++out.malformed_rows;
        out.diagnostics.push_back({line, "missing text or label field"});
        return;
    }
    if (lower_trim(text_it->second).empty()) {
        ++out.malformed_rows;
        out.diagnostics.push_back({line, "empty text"});
        return;
    }
    auto mapped = a.label_map.find(lower_trim(label_it->second));
    if (mapped == a.label_map.end()) {
        ++out.rejected_labels;
        out.diagnostics.push_back({line, "unknown label '" + label_it->second + "'"});
        return;
    }
    ExampleRecord r;
    auto id_it = row.find(a.id_column);
    r.id = (id_it != row.end() && !id_it->second.empty()) ? id_it->second
                                                          : platform_name(platform) + "-" + std::to_string(line);
    r.text = text_it->second;
    r.hate = mapped->second;
    r.platform = platform_name(platform);
    auto pl = row.find("platform");
    if (platform == Platform::Synthetic && pl != row.end() && !pl->second.empty()) r.platform = pl->second;
    if (platform_has_targets(platform) && !a.target_column.empty()) {
        auto t = row.find(a.target_column);
        if (t != row.end() && !lower_trim(t->second).empty()) r.gold_target = t->second;
    }
    out.records.push_back(std::move(r));
}

}  // namespace

LoadResult load_corpus(const std::filesystem::path& path, Platform platform, const AdapterConfig& a) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    LoadResult out;
    if (a.format == AdapterConfig::Format::Jsonl) {
        std::string line;
        std::int64_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (lower_trim(line).empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                ++out.malformed_rows;
                out.diagnostics.push_back({n, std::string("invalid JSON: ") + e.what()});
                continue;
            }
            if (!j.is_object()) {
                ++out.malformed_rows;
                out.diagnostics.push_back({n, "row is not a JSON object"});
                continue;
            }
            std::map<std::string, std::string> row;
            for (auto it = j.begin(); it != j.end(); ++it) row[it.key()] = json_scalar_to_string(it.value());
            ingest_row(row, n, platform, a, out);
        }
    } else {
        CsvReader reader(in, a.format == AdapterConfig::Format::Tsv ? '\t' : ',');
        std::vector<std::string> header, fields;
        std::int64_t line = 0;
        std::string err;
        if (!reader.next(header, line, err) || !err.empty()) throw DataError(path.string() + ": missing header row");
        if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
        for (const auto& required : {a.text_column, a.label_column})
            if (std::find(header.begin(), header.end(), required) == header.end())
                throw DataError(path.string() + ": header lacks column '" + required + "'");
        while (reader.next(fields, line, err)) {
            if (fields.size() == 1 && fields[0].empty()) continue;
            if (!err.empty() || fields.size() != header.size()) {
                ++out.malformed_rows;
                out.diagnostics.push_back({line, err.empty() ? "expected " + std::to_string(header.size()) +
                                                                   " fields, found " + std::to_string(fields.size())
                                                             : err});
                continue;
            }
            std::map<std::string, std::string> row;
            for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = fields[i];
            ingest_row(row, line, platform, a, out);
        }
    }
    out.summary = summarize(out.records, platform_has_targets(platform) && !a.target_column.empty());
    return out;
}

LoadResult load_corpus(const std::filesystem::path& path, Platform platform) {
    return load_corpus(path, platform, AdapterConfig::defaults(platform));
}

nlohmann::json record_to_json(const ExampleRecord& r) {
    nlohmann::json j = {{"id", r.id}, {"text", r.text}, {"hate", r.hate}, {"platform", r.platform}};
    if (r.gold_target) j["gold_target"] = *r.gold_target;
    return j;
}

ExampleRecord record_from_json(const nlohmann::json& j) {
    ExampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.hate = j.at("hate").get<int>();
    r.platform = j.at("platform").get<std::string>();
    if (j.contains("gold_target") && !j.at("gold_target").is_null()) r.gold_target = j.at("gold_target").get<std::string>();
    if (r.text.empty()) throw DataError("record " + r.id + " has empty text");
    if (r.hate != 0 && r.hate != 1) throw DataError("record " + r.id + " has non-binary hate label");
    if (r.gold_target && !platform_has_targets(r.platform))
        throw DataError("record " + r.id + ": platform " + r.platform + " carries no target labels");
    return r;
}

std::vector<ExampleRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<ExampleRecord> out;
    std::string line;
    std::int64_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

void write_records(const std::filesystem::path& path, const std::vector<ExampleRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

Split split(const std::vector<ExampleRecord>& records, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < records.size(); ++i) by_class[records[i].hate == 1].push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<bool> to_val(records.size(), false);
    for (int c = 0; c < 2; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        if (idx.size() < 2)
            throw DataError("corpus too small to stratify: class " + std::to_string(c) + " has " +
                            std::to_string(idx.size()) + " example(s)");
        std::shuffle(idx.begin(), idx.end(), rng);
        auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(idx.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
        for (std::size_t k = 0; k < n_val; ++k) to_val[idx[k]] = true;
    }
    Split s;
    for (std::size_t i = 0; i < records.size(); ++i) (to_val[i] ? s.validation : s.train).push_back(records[i]);
    return s;
}

SyntheticSpec SyntheticSpec::standard(int n_platforms, int n_per_platform, std::uint64_t seed) {
    if (n_platforms < 1 || n_platforms > 26) throw ConfigError("n_platforms must be in [1, 26]");
    SyntheticSpec s;
    s.taxonomy = TargetTaxonomy::standard().classes();
    s.n_per_platform = n_per_platform;
    s.seed = seed;
    char buf[32];
    for (int i = 0; i < 20; ++i) {
        std::snprintf(buf, sizeof(buf), "agg%02d", i);
        s.causal_vocab.emplace_back(buf);
    }
    for (int i = 0; i < 120; ++i) {
        std::snprintf(buf, sizeof(buf), "w%03d", i);
        s.neutral_vocab.emplace_back(buf);
    }
    const int classes = static_cast<int>(s.taxonomy.size());
    for (int p = 0; p < n_platforms; ++p) {
        SyntheticPlatform plat;
        const char letter = static_cast<char>('a' + p);
        plat.name = std::string("synthetic-") + letter;
        for (int c = 0; c < classes; ++c) {
            std::vector<std::string> toks;
            for (int k = 0; k < 4; ++k) {
                std::snprintf(buf, sizeof(buf), "%ctgt%d_%d", letter, c, k);
                toks.emplace_back(buf);
            }
            plat.class_tokens.push_back(std::move(toks));
        }
        // Each platform favors a different region of the taxonomy.
        const int center = (p * 4) % classes;
        double total = 0.0;
        for (int c = 0; c < classes; ++c) {
            const int dist = (c - center + classes) % classes;
            const double w = std::exp(-0.35 * dist);
            plat.class_distribution.push_back(w);
            total += w;
        }
        for (double& w : plat.class_distribution) w /= total;
        s.platforms.push_back(std::move(plat));
    }
    return s;
}

void SyntheticSpec::validate() const {
    if (platforms.empty()) throw ConfigError("synthetic spec has no platforms");
    if (causal_vocab.empty()) throw ConfigError("synthetic spec has no causal vocabulary");
    if (!(hate_rate >= 0.0 && hate_rate <= 1.0)) throw ConfigError("hate_rate must be a probability");
    if (!(spurious_fraction >= 0.0 && spurious_fraction <= 1.0)) throw ConfigError("spurious_fraction must be a probability");
    if (min_neutral < 0 || max_neutral < min_neutral || max_causal < 1 || max_target < 1)
        throw ConfigError("synthetic length parameters are inconsistent");
    std::set<std::string> causal(causal_vocab.begin(), causal_vocab.end());
    std::set<std::string> neutral(neutral_vocab.begin(), neutral_vocab.end());
    for (const auto& w : neutral)
        if (causal.count(w)) throw ConfigError("token '" + w + "' is both causal and neutral");
    std::set<std::string> seen_target;
    for (const auto& p : platforms) {
        if (p.class_tokens.size() != taxonomy.size() || p.class_distribution.size() != taxonomy.size())
            throw ConfigError(p.name + ": one token list and one probability per class required");
        double total = 0.0;
        for (double w : p.class_distribution) {
            if (w < 0.0) throw ConfigError(p.name + ": negative class probability");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ConfigError(p.name + ": class distribution does not sum to 1");
        for (const auto& toks : p.class_tokens) {
            if (toks.empty()) throw ConfigError(p.name + ": empty class token list");
            for (const auto& w : toks) {
                if (causal.count(w) || neutral.count(w))
                    throw ConfigError("target token '" + w + "' overlaps the causal or neutral vocabulary");
                if (!seen_target.insert(w).second) throw ConfigError("target token '" + w + "' is shared across classes or platforms");
            }
        }
    }
    if (spurious_fraction > 0.0) {
        const int c = static_cast<int>(taxonomy.size());
        if (spurious_platform < 0 || spurious_platform >= static_cast<int>(platforms.size()) || spurious_hate_class < 0 ||
            spurious_hate_class >= c || spurious_clean_class < 0 || spurious_clean_class >= c)
            throw ConfigError("spurious planting refers to a missing platform or class");
    }
}

std::map<std::string, int> SyntheticSpec::lexicon() const {
    std::map<std::string, int> out;
    for (const auto& p : platforms)
        for (std::size_t c = 0; c < p.class_tokens.size(); ++c)
            for (const auto& w : p.class_tokens[c]) out[w] = static_cast<int>(c);
    return out;
}

std::vector<SyntheticCorpus> generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::vector<SyntheticCorpus> out;
    for (std::size_t p = 0; p < spec.platforms.size(); ++p) {
        const auto& plat = spec.platforms[p];
        std::mt19937_64 rng(spec.seed * 1'000'003ULL + p);
        std::bernoulli_distribution hate_draw(spec.hate_rate);
        std::bernoulli_distribution spurious_draw(static_cast<int>(p) == spec.spurious_platform ? spec.spurious_fraction : 0.0);
        std::discrete_distribution<int> class_draw(plat.class_distribution.begin(), plat.class_distribution.end());
        std::uniform_int_distribution<int> n_neutral(spec.min_neutral, spec.max_neutral);
        std::uniform_int_distribution<int> n_causal(1, spec.max_causal);
        std::uniform_int_distribution<int> n_target(1, spec.max_target);
        std::uniform_int_distribution<std::size_t> pick_causal(0, spec.causal_vocab.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_neutral(0, spec.neutral_vocab.empty() ? 0 : spec.neutral_vocab.size() - 1);

        SyntheticCorpus corpus;
        corpus.platform = plat.name;
        for (int i = 0; i < spec.n_per_platform; ++i) {
            const int hate = hate_draw(rng) ? 1 : 0;
            int cls = class_draw(rng);
            if (spurious_draw(rng)) cls = hate ? spec.spurious_hate_class : spec.spurious_clean_class;
            std::vector<std::string> words;
            const auto& toks = plat.class_tokens[static_cast<std::size_t>(cls)];
            std::uniform_int_distribution<std::size_t> pick_target(0, toks.size() - 1);
            for (int k = n_target(rng); k > 0; --k) words.push_back(toks[pick_target(rng)]);
            if (!spec.neutral_vocab.empty())
                for (int k = n_neutral(rng); k > 0; --k) words.push_back(spec.neutral_vocab[pick_neutral(rng)]);
            if (hate)
                for (int k = n_causal(rng); k > 0; --k) words.push_back(spec.causal_vocab[pick_causal(rng)]);
            std::shuffle(words.begin(), words.end(), rng);
            std::ostringstream text;
            for (std::size_t k = 0; k < words.size(); ++k) text << (k ? " " : "") << words[k];

            ExampleRecord r;
            r.id = plat.name + "-" + std::to_string(i);
            r.text = text.str();
            r.hate = hate;
            r.gold_target = spec.taxonomy[static_cast<std::size_t>(cls)];
            r.platform = plat.name;
            corpus.records.push_back(std::move(r));
        }
        out.push_back(std::move(corpus));
    }
    return out;
}

}  // namespace hatewatch::data
