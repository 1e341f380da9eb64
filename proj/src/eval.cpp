// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace hatewatch {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return out;
}

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[40];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("bad number '" + s + "' in " + what);
    }
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\t', ' ');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

using Group = std::vector<const std::vector<double>*>;

// Sum and count of distances over all cross pairs, or over i < j when same.
std::pair<double, double> pair_sum(const Group& a, const Group& b, bool same) {
    std::vector<double> partial(a.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t i = 0; i < a.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = same ? i + 1 : 0; j < b.size(); ++j) s += distance(*a[i], *b[j]);
        partial[i] = s;
    }
    const double n = same ? 0.5 * static_cast<double>(a.size()) * (static_cast<double>(a.size()) - 1.0)
                          : static_cast<double>(a.size()) * static_cast<double>(b.size());
    return {std::accumulate(partial.begin(), partial.end(), 0.0), n};
}

}  // namespace

const GridCell& EvalReport::cell(const std::string& source, const std::string& target) const {
    for (const auto& c : cells)
        if (c.source == source && c.target == target) return c;
    throw ConfigError("no grid cell " + source + " -> " + target);
}

bool EvalReport::complete() const {
    return std::all_of(cells.begin(), cells.end(), [](const GridCell& c) { return c.macro_f1.has_value(); });
}

std::string EvalReport::grid_tsv() const {
    std::ostringstream out;
    out << "# config_hash " << config_hash << "\nsource";
    for (const auto& t : targets) out << '\t' << t;
    out << '\n';
    for (const auto& s : sources) {
        out << s;
        for (const auto& t : targets) {
            const auto& c = cell(s, t);
            out << '\t' << (c.macro_f1 ? fmt(*c.macro_f1, "%.4f") : std::string("FAILED"));
        }
        out << '\n';
    }
    return out.str();
}

std::string EvalReport::to_tsv() const {
    std::ostringstream out;
    out << "# config_hash " << config_hash << '\n';
    out << "source\ttarget\tmacro_f1\tf1_nonhate\tf1_hate\tn_examples\terror\n";
    for (const auto& c : cells) {
        out << c.source << '\t' << c.target << '\t';
        if (c.macro_f1)
            out << fmt(*c.macro_f1) << '\t' << fmt(c.f1[0]) << '\t' << fmt(c.f1[1]);
        else
            out << "FAILED\t\t";
        out << '\t' << c.n_examples << '\t' << one_line(c.error) << '\n';
    }
    return out.str();
}

EvalReport EvalReport::from_tsv(const std::string& text) {
    EvalReport r;
    std::istringstream in(text);
    std::string line;
    bool header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.rfind("# config_hash ", 0) == 0) {
            r.config_hash = line.substr(14);
            continue;
        }
        if (!header) {
            if (line.rfind("source\ttarget\tmacro_f1", 0) != 0) throw DataError("not an evaluation report");
            header = true;
            continue;
        }
        const auto f = split_tabs(line);
        if (f.size() != 7) throw DataError("report line " + std::to_string(lineno) + ": expected 7 fields");
        GridCell c;
        c.source = f[0];
        c.target = f[1];
        const std::string where = "report line " + std::to_string(lineno);
        if (f[2] != "FAILED") {
            c.macro_f1 = parse_double(f[2], where);
            c.f1 = {parse_double(f[3], where), parse_double(f[4], where)};
            if (*c.macro_f1 < 0.0 || *c.macro_f1 > 1.0) throw DataError(where + ": macro-F1 outside [0, 1]");
        }
        c.n_examples = static_cast<std::int64_t>(parse_double(f[5], where));
        c.error = f[6];
        if (std::find(r.sources.begin(), r.sources.end(), c.source) == r.sources.end()) r.sources.push_back(c.source);
        if (std::find(r.targets.begin(), r.targets.end(), c.target) == r.targets.end()) r.targets.push_back(c.target);
        r.cells.push_back(std::move(c));
    }
    if (!header) throw DataError("not an evaluation report");
    if (r.cells.size() != r.sources.size() * r.targets.size()) throw DataError("report grid is not rectangular");
    return r;
}

data::Split grid_split(const std::vector<data::ExampleRecord>& source, const TrainConfig& config,
                       double test_fraction) {
    return data::split(source, test_fraction, config.seed + 0x7E57);
}

EvalReport cross_platform_grid(const std::vector<NamedCorpus>& sources, const std::vector<NamedCorpus>& targets,
                               const TrainConfig& config, const GridOptions& options) {
    if (sources.empty() || targets.empty()) throw ConfigError("the grid needs at least one source and one target");
    EvalReport report;
    report.config_hash = config.hash();
    for (const auto& s : sources) report.sources.push_back(s.name);
    for (const auto& t : targets) report.targets.push_back(t.name);

    for (const auto& source : sources) {
        std::optional<Checkpoint> ckpt;
        std::vector<data::ExampleRecord> held_out;
        std::string failure;
        try {
            auto parts = grid_split(source.records, config, options.test_fraction);
            held_out = std::move(parts.validation);
            ckpt = train(parts.train, config, options.train).best;
            if (options.on_trained) options.on_trained(source.name, *ckpt);
        } catch (const std::exception& e) {
            failure = std::string("training failed: ") + e.what();
        }
        for (const auto& target : targets) {
            GridCell cell;
            cell.source = source.name;
            cell.target = target.name;
            const auto& corpus = target.name == source.name ? held_out : target.records;
            cell.n_examples = static_cast<std::int64_t>(corpus.size());
            if (!ckpt) {
                cell.error = failure;
            } else {
                try {
                    const auto m = evaluate(*ckpt, corpus, options.train.features).metrics;
                    cell.macro_f1 = m.macro_f1;
                    cell.f1 = m.f1;
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
            }
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

std::vector<LatentRow> export_latents(const Checkpoint& ckpt, const std::vector<NamedCorpus>& corpora,
                                      int n_per_platform, std::uint64_t seed, const FeatureTable* features) {
    if (n_per_platform < 1) throw ConfigError("latent export needs at least one row per platform");
    const Model model = ckpt.model();
    std::vector<LatentRow> out;
    for (const auto& corpus : corpora) {
        const auto n = static_cast<std::size_t>(n_per_platform);
        if (corpus.records.size() < n)
            throw ConfigError("corpus '" + corpus.name + "' has " + std::to_string(corpus.records.size()) +
                              " records, fewer than the " + std::to_string(n) + " requested");
        std::vector<std::size_t> rows(corpus.records.size());
        std::iota(rows.begin(), rows.end(), 0);
        std::mt19937_64 rng(seed);
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(n);
        std::sort(rows.begin(), rows.end());

        std::vector<data::ExampleRecord> picked;
        for (auto r : rows) picked.push_back(corpus.records[r]);
        const auto seqs = tokenize(ckpt.vocab, picked, model.config().max_len);
        std::vector<std::size_t> all(picked.size());
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t start = 0; start < picked.size(); start += 256) {
            const std::size_t end = std::min(picked.size(), start + 256);
            std::span<const std::size_t> chunk(all.data() + start, end - start);
            std::vector<TokenSequence> batch_seqs(seqs.begin() + static_cast<std::ptrdiff_t>(start),
                                                  seqs.begin() + static_cast<std::ptrdiff_t>(end));
            Batch batch = Batch::collate(batch_seqs);
            batch.features = feature_rows(features, picked, chunk);
            ForwardOptions opts;
            opts.decode = false;
            Tape t = Tape::inference(model.params());
            const auto v = model.forward(t, batch, opts);
            const Matrix& mu = t.value(v.mu);
            const Matrix& xw = t.value(v.target);
            for (std::size_t i = start; i < end; ++i) {
                const int r = static_cast<int>(i - start);
                LatentRow row;
                row.platform = corpus.name;
                row.hate = picked[i].hate;
                row.id = picked[i].id;
                row.causal.assign(mu.row(r).begin(), mu.row(r).end());
                row.target.assign(xw.row(r).begin(), xw.row(r).end());
                out.push_back(std::move(row));
            }
        }
    }
    return out;
}

void write_latents(const std::filesystem::path& path, const std::vector<LatentRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    const std::size_t nc = rows.empty() ? 0 : rows.front().causal.size();
    const std::size_t nt = rows.empty() ? 0 : rows.front().target.size();
    out << "platform\thate\tid";
    for (std::size_t k = 0; k < nc; ++k) out << "\tc" << k;
    for (std::size_t k = 0; k < nt; ++k) out << "\tt" << k;
    out << '\n';
    for (const auto& r : rows) {
        if (r.causal.size() != nc || r.target.size() != nt) throw ConfigError("latent rows differ in dimension");
        out << one_line(r.platform) << '\t' << r.hate << '\t' << one_line(r.id);
        for (double v : r.causal) out << '\t' << fmt(v);
        for (double v : r.target) out << '\t' << fmt(v);
        out << '\n';
    }
}

std::vector<LatentRow> read_latents(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + " is empty");
    const auto header = split_tabs(line);
    if (header.size() < 3 || header[0] != "platform" || header[1] != "hate" || header[2] != "id")
        throw DataError(path.string() + " is not a latent dump");
    std::size_t nc = 0, nt = 0;
    for (std::size_t k = 3; k < header.size(); ++k) (header[k][0] == 'c' ? nc : nt) += 1;
    std::vector<LatentRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (f.size() != header.size()) throw DataError(where + ": expected " + std::to_string(header.size()) + " fields");
        LatentRow r;
        r.platform = f[0];
        r.hate = static_cast<int>(parse_double(f[1], where));
        r.id = f[2];
        for (std::size_t k = 0; k < nc; ++k) r.causal.push_back(parse_double(f[3 + k], where));
        for (std::size_t k = 0; k < nt; ++k) r.target.push_back(parse_double(f[3 + nc + k], where));
        rows.push_back(std::move(r));
    }
    return rows;
}

double distance_ratio(const std::vector<LatentRow>& rows, LatentKind kind, const std::string& platform_a,
                      const std::string& platform_b) {
    double cross = 0.0, n_cross = 0.0, within = 0.0, n_within = 0.0;
    for (int h = 0; h < 2; ++h) {
        Group a, b;
        for (const auto& r : rows) {
            if (r.hate != h) continue;
            const auto* v = kind == LatentKind::Causal ? &r.causal : &r.target;
            if (r.platform == platform_a) a.push_back(v);
            else if (r.platform == platform_b) b.push_back(v);
        }
        if (a.empty() || b.empty()) continue;
        const auto c = pair_sum(a, b, false);
        const auto wa = pair_sum(a, a, true);
        const auto wb = pair_sum(b, b, true);
        cross += c.first;
        n_cross += c.second;
        within += wa.first + wb.first;
        n_within += wa.second + wb.second;
    }
    if (n_cross == 0.0 || n_within == 0.0) throw DataError("distance ratio needs rows of a shared hate class on both platforms");
    const double w = within / n_within;
    if (w == 0.0) throw NumericError("distance_ratio", "within-platform distances are all zero");
    return (cross / n_cross) / w;
}

}  // namespace hatewatch
