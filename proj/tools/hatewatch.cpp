// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

// Command-line driver: data preparation, synthetic corpora, training, grid
// evaluation, weak labeling, latent export and plots.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "hatewatch/eval.hpp"
#include "hatewatch/plot.hpp"

#ifndef HATEWATCH_RESOURCE_DIR
#define HATEWATCH_RESOURCE_DIR "resources"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hatewatch;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kPartial = 3 };

std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
}

/// One per run, written next to the run's output.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    std::string config_path;
    json resolved_config;
    std::string config_hash;
    std::optional<std::uint64_t> seed;
    json inputs = json::array();
    json outputs = json::array();
    std::string started = now_utc();
    fs::path path;  // empty until the output location is known

    void input(const fs::path& p) {
        const auto bytes = read_file(p);
        inputs.push_back({{"path", p.string()}, {"bytes", bytes.size()}, {"fnv1a", fnv1a_hex(bytes)}});
    }
    void output(const fs::path& p) { outputs.push_back(p.string()); }
    void config(const TrainConfig& cfg) {
        resolved_config = cfg.to_json();
        config_hash = cfg.hash();
        seed = cfg.seed;
    }

    void write(int exit_code, const std::string& error) const {
        if (path.empty()) return;
        json j{{"command", command},   {"argv", argv},     {"config_path", config_path}, {"inputs", inputs},
               {"outputs", outputs},   {"started", started}, {"finished", now_utc()},    {"exit_code", exit_code}};
        if (!resolved_config.is_null()) {
            j["resolved_config"] = resolved_config;
            j["config_hash"] = config_hash;
        }
        if (seed) j["seed"] = *seed;
        if (!error.empty()) j["error"] = error;
        write_file(path, j.dump(2) + "\n");
    }
};

fs::path manifest_for_dir(const fs::path& dir) { return dir / "manifest.json"; }
fs::path manifest_for_file(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend;
    std::optional<int> max_steps;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "run config (JSON); a run manifest also works");
    cmd->add_option("--seed", f.seed, "overrides the config seed");
    cmd->add_option("--backend", f.backend, "encoder backend")->check(CLI::IsMember({"toy", "pretrained"}));
    cmd->add_option("--max-steps", f.max_steps, "overrides the config step budget")->check(CLI::NonNegativeNumber);
}

// Flags override the file, the file overrides defaults.
TrainConfig resolve_config(const CommonFlags& f, RunManifest& m) {
    TrainConfig cfg;
    if (!f.config.empty()) {
        json j;
        try {
            j = json::parse(read_file(f.config));
        } catch (const json::exception& e) {
            throw ConfigError(f.config + ": " + e.what());
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
        if (j.is_object() && j.contains("resolved_config")) j = j.at("resolved_config");
        cfg = TrainConfig::from_json(j);
        m.config_path = f.config;
        m.input(f.config);
    }
    if (f.seed) cfg.seed = *f.seed;
    if (f.backend) cfg.model.backend = parse_backend(*f.backend);
    if (f.max_steps) cfg.max_steps = *f.max_steps;
    cfg.model.dropout = cfg.dropout;
    cfg.validate();
    return cfg;
}

fs::path shipped_lexicon() {
    if (const char* dir = std::getenv("HATEWATCH_RESOURCES")) return fs::path(dir) / "lexicon.json";
    return fs::path(HATEWATCH_RESOURCE_DIR) / "lexicon.json";
}

// Explicit path, else a lexicon.json written by `synth` beside the corpus,
// else the shipped one.
fs::path resolve_lexicon(const std::string& configured, const fs::path& corpus) {
    if (!configured.empty()) return configured;
    const auto sibling = corpus.parent_path() / "lexicon.json";
    if (fs::exists(sibling)) return fs::absolute(sibling);
    return fs::absolute(shipped_lexicon());
}

struct Collaborators {
    weak::Lexicon lexicon;
    std::unique_ptr<weak::LabelerClient> llm;
    std::optional<FeatureTable> features;

    TrainOptions options(bool verbose) const {
        TrainOptions o;
        o.lexicon = &lexicon;
        o.llm = llm.get();
        o.features = features ? &*features : nullptr;
        if (verbose) o.log = [](const std::string& s) { std::cerr << s << '\n'; };
        return o;
    }
};

std::unique_ptr<weak::LabelerClient> make_llm(const std::string& replay, const TargetTaxonomy& taxonomy,
                                              RunManifest& m) {
    if (!replay.empty()) {
        m.input(replay);
        return std::make_unique<weak::ReplayClient>(weak::ReplayClient::load(replay, taxonomy));
    }
    weak::HttpClientConfig http;
    if (const char* key = std::getenv(weak::kApiKeyEnv)) http.api_key = key;
    return std::make_unique<weak::HttpLabelerClient>(http);
}

Collaborators load_collaborators(TrainConfig& cfg, const fs::path& corpus, const std::string& replay,
                                 RunManifest& m) {
    Collaborators c;
    const auto taxonomy = training_taxonomy(cfg);
    const auto lex = resolve_lexicon(cfg.lexicon, corpus);
    cfg.lexicon = lex.string();
    c.lexicon = weak::Lexicon::load(lex, taxonomy);
    m.input(lex);
    if (weak::parse_source_kind(cfg.weak_source) == weak::SourceKind::ExternalLlm) c.llm = make_llm(replay, taxonomy, m);
    if (cfg.model.backend == Backend::Pretrained) {
        c.features = FeatureTable::load(cfg.features);
        m.input(cfg.features);
    }
    return c;
}

NamedCorpus load_named(const fs::path& path, RunManifest& m) {
    NamedCorpus c;
    c.records = data::read_records(path);
    m.input(path);
    c.name = path.stem().string();
    if (!c.records.empty() &&
        std::all_of(c.records.begin(), c.records.end(),
                    [&](const data::ExampleRecord& r) { return r.platform == c.records.front().platform; }))
        c.name = c.records.front().platform;
    return c;
}

json summary_json(const std::string& platform, const data::LoadResult& r) {
    json j = r.summary.to_json();
    j["platform"] = platform;
    j["rejected_labels"] = r.rejected_labels;
    j["malformed_rows"] = r.malformed_rows;
    return j;
}

// ---------------------------------------------------------------- prepare

struct PrepareArgs {
    std::string platform;
    std::vector<std::string> inputs;
    std::string adapter;
    std::string out;
};

int cmd_prepare(const PrepareArgs& a, RunManifest& m) {
    m.path = manifest_for_file(a.out);
    const auto platform = data::parse_platform(a.platform);
    auto adapter = data::AdapterConfig::defaults(platform);
    if (!a.adapter.empty()) {
        adapter = data::AdapterConfig::from_json(json::parse(read_file(a.adapter)), platform);
        m.input(a.adapter);
    }
    data::LoadResult all;
    for (const auto& in : a.inputs) {
        auto r = data::load_corpus(in, platform, adapter);
        m.input(in);
        constexpr std::size_t kShown = 20;
        for (std::size_t i = 0; i < r.diagnostics.size() && i < kShown; ++i)
            std::cerr << in << ":" << r.diagnostics[i].line << ": " << r.diagnostics[i].message << '\n';
        if (r.diagnostics.size() > kShown) std::cerr << in << ": " << r.diagnostics.size() - kShown << " more\n";
        all.rejected_labels += r.rejected_labels;
        all.malformed_rows += r.malformed_rows;
        std::move(r.records.begin(), r.records.end(), std::back_inserter(all.records));
    }
    if (all.records.empty()) throw DataError("no usable records in the input");
    all.summary = data::summarize(all.records, data::platform_has_targets(platform));

    data::write_records(a.out, all.records);
    m.output(a.out);
    const fs::path summary_path = a.out + ".summary.json";
    const auto summary = summary_json(data::platform_name(platform), all);
    write_file(summary_path, summary.dump(2) + "\n");
    m.output(summary_path);

    char pct[16];
    std::snprintf(pct, sizeof pct, "%.1f", all.summary.hate_pct);
    std::cout << data::platform_name(platform) << ": " << all.summary.n_posts << " posts, " << pct << "% hateful";
    if (all.rejected_labels + all.malformed_rows > 0)
        std::cout << " (" << all.rejected_labels << " rejected labels, " << all.malformed_rows << " malformed rows)";
    std::cout << '\n';
    return kOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    int platforms = 2;
    int n = 1000;
    std::uint64_t seed = 0;
    double spurious = 0.0;
    int spurious_platform = 0;
    double hate_rate = 0.5;
    std::string out;
};

int cmd_synth(const SynthArgs& a, RunManifest& m) {
    const fs::path dir = a.out;
    m.path = manifest_for_dir(dir);
    m.seed = a.seed;
    auto spec = data::SyntheticSpec::standard(a.platforms, a.n, a.seed);
    spec.spurious_fraction = a.spurious;
    spec.spurious_platform = a.spurious_platform;
    spec.hate_rate = a.hate_rate;
    spec.validate();
    fs::create_directories(dir);
    for (const auto& c : data::generate_synthetic(spec)) {
        const auto path = dir / (c.platform + ".jsonl");
        data::write_records(path, c.records);
        m.output(path);
        const auto s = data::summarize(c.records, true);
        std::cout << c.platform << ": " << s.n_posts << " posts, " << s.hate_pct << "% hateful -> " << path.string() << '\n';
    }
    json lex = json::object();
    for (const auto& name : spec.taxonomy) lex[name] = json::array();
    for (const auto& [word, cls] : spec.lexicon()) lex[spec.taxonomy.at(static_cast<std::size_t>(cls))].push_back(word);
    write_file(dir / "lexicon.json", lex.dump(2) + "\n");
    m.output(dir / "lexicon.json");
    return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    CommonFlags common;
    std::string source;
    std::string out;
    std::string replay;
    bool quiet = false;
};

int cmd_train(const TrainArgs& a, RunManifest& m) {
    const fs::path dir = a.out;
    m.path = manifest_for_dir(dir);
    auto cfg = resolve_config(a.common, m);
    const auto corpus = load_named(a.source, m);
    auto collab = load_collaborators(cfg, a.source, a.replay, m);
    m.config(cfg);

    const auto result = train(corpus.records, cfg, collab.options(!a.quiet));
    result.best.save(dir);
    for (const char* f : {"params.bin", "optimizer.bin", "config.json", "vocab.json", "metrics.json"}) m.output(dir / f);
    double best_f1 = 0.0;
    for (const auto& h : result.best.history)
        if (h.step == result.best.step) best_f1 = h.macro_f1;
    std::cout << "trained " << result.steps_run << " steps on " << corpus.name << "; best validation macro-F1 "
              << best_f1 << " at step " << result.best.step << (result.stopped_early ? " (early stop)" : "")
              << "\ncheckpoint: " << dir.string() << '\n';
    return kOk;
}

// ---------------------------------------------------------------- grid

struct GridArgs {
    CommonFlags common;
    std::vector<std::string> sources;
    std::vector<std::string> targets;
    std::string out;
    std::string replay;
    double test_fraction = 0.1;
    bool quiet = false;
};

int cmd_grid(const GridArgs& a, RunManifest& m) {
    const fs::path dir = a.out;
    m.path = manifest_for_dir(dir);
    auto cfg = resolve_config(a.common, m);
    std::vector<NamedCorpus> sources, targets;
    for (const auto& s : a.sources) sources.push_back(load_named(s, m));
    for (const auto& t : a.targets) targets.push_back(load_named(t, m));
    auto collab = load_collaborators(cfg, a.sources.front(), a.replay, m);
    m.config(cfg);

    GridOptions opts;
    opts.train = collab.options(!a.quiet);
    opts.test_fraction = a.test_fraction;
    opts.on_trained = [&](const std::string& source, const Checkpoint& ckpt) {
        const auto path = dir / "checkpoints" / source;
        ckpt.save(path);
        m.output(path);
    };
    const auto report = cross_platform_grid(sources, targets, cfg, opts);
    write_file(dir / "report.tsv", report.to_tsv());
    write_file(dir / "grid.tsv", report.grid_tsv());
    m.output(dir / "report.tsv");
    m.output(dir / "grid.tsv");
    std::cout << report.grid_tsv();
    for (const auto& c : report.cells)
        if (!c.macro_f1) std::cerr << "cell " << c.source << " -> " << c.target << " failed: " << c.error << '\n';
    return report.complete() ? kOk : kPartial;
}

// ---------------------------------------------------------------- weaklabel

struct WeakLabelArgs {
    std::string corpus;
    std::string labeler = "lexicon";
    std::string replay;
    std::string lexicon;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_weaklabel(const WeakLabelArgs& a, RunManifest& m) {
    m.path = manifest_for_file(a.out);
    m.seed = a.seed;
    const auto kind = weak::parse_source_kind(a.labeler);
    const auto taxonomy = TargetTaxonomy::standard();
    const auto lex_path = resolve_lexicon(a.lexicon, a.corpus);
    const auto lexicon = weak::Lexicon::load(lex_path, taxonomy);
    m.input(lex_path);
    std::unique_ptr<weak::LabelerClient> llm;
    if (kind == weak::SourceKind::ExternalLlm) llm = make_llm(a.replay, taxonomy, m);
    const auto records = data::read_records(a.corpus);
    m.input(a.corpus);

    std::ostringstream out;
    std::map<std::string, int> provenance;
    for (const auto& r : records) {
        SoftLabel label;
        std::string prov = weak::source_kind_name(kind);
        switch (kind) {
            case weak::SourceKind::Lexicon:
                label = weak::lexicon_label(r.text, taxonomy, lexicon);
                break;
            case weak::SourceKind::GoldPassthrough:
                weak::check_source_allowed(kind, r.platform);
                label = weak::gold_label(r, taxonomy);
                break;
            case weak::SourceKind::ExternalLlm: {
                auto o = weak::llm_label(r.text, taxonomy, *llm, lexicon);
                for (const auto& w : o.warnings) std::cerr << r.id << ": " << w << '\n';
                label = std::move(o.label);
                prov = o.provenance;
                break;
            }
        }
        if (a.noise > 0.0) label = weak::corrupt_label(label, r.text, a.noise, a.seed);
        ++provenance[prov];
        json j{{"id", r.id}, {"platform", r.platform}, {"probs", label.probs}, {"confidence", label.confidence},
               {"provenance", prov}};
        j["target"] = label.confidence > 0.0 ? json(taxonomy.name(losses::argmax(label.probs))) : json(nullptr);
        out << j.dump() << '\n';
    }
    write_file(a.out, out.str());
    m.output(a.out);
    std::cout << records.size() << " records labeled";
    for (const auto& [p, n] : provenance) std::cout << "; " << p << ": " << n;
    std::cout << '\n';
    return kOk;
}

// ---------------------------------------------------------------- export

struct ExportArgs {
    std::string checkpoint;
    std::vector<std::string> corpora;
    int n = 1000;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_export(const ExportArgs& a, RunManifest& m) {
    m.path = manifest_for_file(a.out);
    const auto ckpt = Checkpoint::load(a.checkpoint);
    m.input(fs::path(a.checkpoint) / "params.bin");
    m.config(ckpt.config);
    m.seed = a.seed;
    std::optional<FeatureTable> features;
    if (ckpt.config.model.backend == Backend::Pretrained) features = FeatureTable::load(ckpt.config.features);
    std::vector<NamedCorpus> corpora;
    for (const auto& c : a.corpora) corpora.push_back(load_named(c, m));
    const auto rows = export_latents(ckpt, corpora, a.n, a.seed, features ? &*features : nullptr);
    write_latents(a.out, rows);
    m.output(a.out);
    std::cout << rows.size() << " latent rows -> " << a.out << '\n';
    for (std::size_t i = 1; i < corpora.size(); ++i) {
        const auto& p = corpora[0].name;
        const auto& q = corpora[i].name;
        std::cout << p << " vs " << q << ": cross/within distance ratio causal "
                  << distance_ratio(rows, LatentKind::Causal, p, q) << ", target "
                  << distance_ratio(rows, LatentKind::Target, p, q) << '\n';
    }
    return kOk;
}

// ---------------------------------------------------------------- plot

struct PlotArgs {
    std::string latents;
    std::string report;
    std::string kind = "causal";
    std::string out;
    std::uint64_t seed = 0;
    double perplexity = 30.0;
    int iterations = 1000;
};

int cmd_plot(const PlotArgs& a, RunManifest& m) {
    m.path = manifest_for_file(a.out);
    m.seed = a.seed;
    const fs::path svg = a.out + ".svg";
    if (!a.report.empty()) {
        const auto report = EvalReport::from_tsv(read_file(a.report));
        m.input(a.report);
        write_file(svg, plot::grid_svg(report, "Cross-platform macro-F1"));
        m.output(svg);
        std::cout << "grid image -> " << svg.string() << '\n';
        return kOk;
    }
    const auto rows = read_latents(a.latents);
    m.input(a.latents);
    if (static_cast<int>(rows.size()) < plot::kMinProjectionPoints)
        throw DataError("projection needs at least " + std::to_string(plot::kMinProjectionPoints) + " points, the dump has " +
                        std::to_string(rows.size()));
    const bool causal = a.kind == "causal";
    const std::size_t dim = causal ? rows.front().causal.size() : rows.front().target.size();
    Matrix x(static_cast<int>(rows.size()), static_cast<int>(dim));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& v = causal ? rows[i].causal : rows[i].target;
        std::copy(v.begin(), v.end(), x.row(static_cast<int>(i)).begin());
    }
    plot::ProjectionOptions opts;
    opts.seed = a.seed;
    opts.perplexity = a.perplexity;
    opts.iterations = a.iterations;
    const Matrix y = plot::tsne(x, opts);

    std::ostringstream coords;
    coords << "platform\thate\tid\tx\ty\n";
    std::vector<plot::ScatterPoint> points;
    char buf[64];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const int r = static_cast<int>(i);
        std::snprintf(buf, sizeof buf, "%.17g\t%.17g", y(r, 0), y(r, 1));
        coords << rows[i].platform << '\t' << rows[i].hate << '\t' << rows[i].id << '\t' << buf << '\n';
        points.push_back({y(r, 0), y(r, 1), rows[i].platform, rows[i].hate == 1});
    }
    const fs::path coords_path = a.out + ".coords.tsv";
    write_file(coords_path, coords.str());
    write_file(svg, plot::scatter_svg(points, std::string(causal ? "Causal" : "Target") + " latents, t-SNE"));
    m.output(coords_path);
    m.output(svg);
    std::cout << "projection of " << rows.size() << " rows -> " << svg.string() << ", " << coords_path.string() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-platform hate speech detection with causal disentanglement"};
    app.require_subcommand(1);
    RunManifest manifest;
    for (int i = 0; i < argc; ++i) manifest.argv.emplace_back(argv[i]);

    PrepareArgs prepare;
    auto* c_prepare = app.add_subcommand("prepare", "convert a platform release into canonical records");
    c_prepare->add_option("--platform", prepare.platform, "GAB, Reddit, X or YouTube")->required();
    c_prepare->add_option("inputs", prepare.inputs, "source files")->required()->check(CLI::ExistingFile);
    c_prepare->add_option("--adapter", prepare.adapter, "column/label overrides (JSON)")->check(CLI::ExistingFile);
    c_prepare->add_option("--out", prepare.out, "canonical JSONL output")->required();

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic multi-platform corpus");
    c_synth->add_option("--platforms", synth.platforms, "number of platforms")->check(CLI::Range(1, 26));
    c_synth->add_option("--n", synth.n, "posts per platform")->check(CLI::PositiveNumber);
    c_synth->add_option("--seed", synth.seed);
    c_synth->add_option("--spurious", synth.spurious, "share of label-correlated target tokens")->check(CLI::Range(0.0, 1.0));
    c_synth->add_option("--spurious-platform", synth.spurious_platform, "platform index carrying them");
    c_synth->add_option("--hate-rate", synth.hate_rate)->check(CLI::Range(0.0, 1.0));
    c_synth->add_option("--out", synth.out, "output directory")->required();

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "train on one source corpus");
    add_common(c_train, tr.common);
    c_train->add_option("--source", tr.source, "canonical JSONL corpus")->required()->check(CLI::ExistingFile);
    c_train->add_option("--out", tr.out, "checkpoint directory")->required();
    c_train->add_option("--replay", tr.replay, "recorded labeler replies for weak_source llm")->check(CLI::ExistingFile);
    c_train->add_flag("--quiet", tr.quiet, "no progress log");

    GridArgs grid;
    auto* c_grid = app.add_subcommand("grid", "train per source, score every target");
    add_common(c_grid, grid.common);
    c_grid->add_option("--source", grid.sources, "source corpora")->required()->check(CLI::ExistingFile);
    c_grid->add_option("--target", grid.targets, "target corpora")->required()->check(CLI::ExistingFile);
    c_grid->add_option("--out", grid.out, "report directory")->required();
    c_grid->add_option("--replay", grid.replay)->check(CLI::ExistingFile);
    c_grid->add_option("--test-fraction", grid.test_fraction, "in-dataset held-out share")->check(CLI::Range(0.01, 0.99));
    c_grid->add_flag("--quiet", grid.quiet);

    WeakLabelArgs wl;
    auto* c_weak = app.add_subcommand("weaklabel", "assign weak target-group labels");
    c_weak->add_option("--corpus", wl.corpus)->required()->check(CLI::ExistingFile);
    c_weak->add_option("--labeler", wl.labeler, "lexicon, llm or gold")->check(CLI::IsMember({"lexicon", "llm", "gold"}));
    c_weak->add_option("--replay", wl.replay, "recorded replies; without it llm mode calls the live API")->check(CLI::ExistingFile);
    c_weak->add_option("--lexicon", wl.lexicon)->check(CLI::ExistingFile);
    c_weak->add_option("--noise", wl.noise, "planted label-noise rate")->check(CLI::Range(0.0, 1.0));
    c_weak->add_option("--seed", wl.seed);
    c_weak->add_option("--out", wl.out)->required();

    ExportArgs ex;
    auto* c_export = app.add_subcommand("export", "dump causal and target latents");
    c_export->add_option("--checkpoint", ex.checkpoint)->required()->check(CLI::ExistingDirectory);
    c_export->add_option("--corpus", ex.corpora, "one per platform")->required()->check(CLI::ExistingFile);
    c_export->add_option("--n", ex.n, "rows per platform")->check(CLI::PositiveNumber);
    c_export->add_option("--seed", ex.seed);
    c_export->add_option("--out", ex.out)->required();

    PlotArgs pl;
    auto* c_plot = app.add_subcommand("plot", "render a latent projection or a grid table");
    auto* o_lat = c_plot->add_option("--latents", pl.latents)->check(CLI::ExistingFile);
    auto* o_rep = c_plot->add_option("--report", pl.report)->check(CLI::ExistingFile);
    o_lat->excludes(o_rep);
    c_plot->add_option("--kind", pl.kind, "latent to project")->check(CLI::IsMember({"causal", "target"}));
    c_plot->add_option("--seed", pl.seed);
    c_plot->add_option("--perplexity", pl.perplexity)->check(CLI::PositiveNumber);
    c_plot->add_option("--iterations", pl.iterations)->check(CLI::PositiveNumber);
    c_plot->add_option("--out", pl.out, "output prefix")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }
    if (c_plot->parsed() && pl.latents.empty() && pl.report.empty()) {
        std::cerr << "plot: one of --latents or --report is required\n";
        return kUsage;
    }

    int code = kOk;
    std::string error;
    const std::map<const CLI::App*, std::function<int()>> commands = {
        {c_prepare, [&] { return cmd_prepare(prepare, manifest); }},
        {c_synth, [&] { return cmd_synth(synth, manifest); }},
        {c_train, [&] { return cmd_train(tr, manifest); }},
        {c_grid, [&] { return cmd_grid(grid, manifest); }},
        {c_weak, [&] { return cmd_weaklabel(wl, manifest); }},
        {c_export, [&] { return cmd_export(ex, manifest); }},
        {c_plot, [&] { return cmd_plot(pl, manifest); }},
    };
    const CLI::App* chosen = app.get_subcommands().front();
    manifest.command = chosen->get_name();
    try {
        code = commands.at(chosen)();
    } catch (const ConfigError& e) {
        error = e.what();
        code = kUsage;
    } catch (const std::exception& e) {
        error = e.what();
        code = kData;
    }
    if (!error.empty()) std::cerr << "error: " << error << '\n';
    try {
        manifest.write(code, error);
    } catch (const std::exception& e) {
        std::cerr << "error: could not write the run manifest: " << e.what() << '\n';
        if (code == kOk) code = kData;
    }
    return code;
}
