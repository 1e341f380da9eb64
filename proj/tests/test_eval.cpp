// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hatewatch/eval.hpp"
#include "hatewatch/plot.hpp"
#include "test_util.hpp"

using namespace hatewatch;

namespace {

TrainConfig small_config() {
    TrainConfig c;
    c.batch_size = 16;
    c.max_steps = 4;
    c.eval_every = 2;
    c.model.max_len = 24;
    c.model.h_d = 32;
    c.model.layers = 1;
    c.model.heads = 2;
    c.model.ffn = 64;
    c.model.h_causal = 16;
    c.model.h_disc = 8;
    c.model.head_hidden = 32;
    c.model.decoder_dim = 32;
    c.model.decoder_heads = 2;
    c.model.decoder_ffn = 64;
    return c;
}

struct Fixture {
    data::SyntheticSpec spec = data::SyntheticSpec::standard(2, 240, 7);
    std::vector<data::SyntheticCorpus> corpora = data::generate_synthetic(spec);
    weak::Lexicon lexicon{spec.lexicon(), 9};

    NamedCorpus corpus(int p) const { return {corpora[static_cast<std::size_t>(p)].platform, corpora[static_cast<std::size_t>(p)].records}; }
    GridOptions options() const {
        GridOptions o;
        o.train.lexicon = &lexicon;
        return o;
    }
};

LatentRow row(const std::string& platform, int hate, std::vector<double> v) {
    LatentRow r;
    r.platform = platform;
    r.hate = hate;
    r.causal = v;
    r.target = std::move(v);
    return r;
}

}  // namespace

TEST_CASE("one-cell grid equals train then evaluate") {
    Fixture f;
    const auto cfg = small_config();
    const auto report = cross_platform_grid({f.corpus(0)}, {f.corpus(1)}, cfg, f.options());
    REQUIRE(report.cells.size() == 1);
    REQUIRE(report.complete());

    const auto parts = grid_split(f.corpora[0].records, cfg, 0.1);
    TrainOptions o;
    o.lexicon = &f.lexicon;
    const auto ckpt = train(parts.train, cfg, o).best;
    const auto m = evaluate(ckpt, f.corpora[1].records).metrics;
    CHECK(*report.cells[0].macro_f1 == m.macro_f1);
    CHECK(report.cells[0].n_examples == static_cast<std::int64_t>(f.corpora[1].records.size()));
    CHECK(report.config_hash == cfg.hash());
}

TEST_CASE("two-by-two grid fills every cell independent of target order") {
    Fixture f;
    const auto cfg = small_config();
    const auto a = cross_platform_grid({f.corpus(0), f.corpus(1)}, {f.corpus(0), f.corpus(1)}, cfg, f.options());
    const auto b = cross_platform_grid({f.corpus(0), f.corpus(1)}, {f.corpus(1), f.corpus(0)}, cfg, f.options());
    REQUIRE(a.cells.size() == 4);
    CHECK(a.complete());
    for (const auto& s : a.sources)
        for (const auto& t : a.targets) {
            CHECK(a.cell(s, t).macro_f1 == b.cell(s, t).macro_f1);
            const double v = *a.cell(s, t).macro_f1;
            CHECK((v >= 0.0 && v <= 1.0));
        }
    // The in-dataset cell scores the held-out part of the source only.
    CHECK(a.cell(a.sources[0], a.sources[0]).n_examples == 24);
    CHECK(a.grid_tsv().find("\nsource\t" + a.targets[0] + "\t" + a.targets[1] + "\n") != std::string::npos);
}

TEST_CASE("grid records failures per cell and keeps going") {
    Fixture f;
    const auto cfg = small_config();
    NamedCorpus empty{"empty", {}};
    // A single non-hate record cannot be stratified, so training fails.
    NamedCorpus one_class{"one-class", {}};
    for (const auto& r : f.corpora[0].records)
        if (r.hate == 1) one_class.records.push_back(r);
    one_class.records.push_back(*std::find_if(f.corpora[0].records.begin(), f.corpora[0].records.end(),
                                              [](const data::ExampleRecord& r) { return r.hate == 0; }));
    const auto report = cross_platform_grid({f.corpus(0), one_class}, {f.corpus(1), empty}, cfg, f.options());
    REQUIRE(report.cells.size() == 4);
    CHECK_FALSE(report.complete());
    CHECK(report.cell(f.corpora[0].platform, f.corpora[1].platform).macro_f1.has_value());
    const auto& empty_cell = report.cell(f.corpora[0].platform, "empty");
    CHECK_FALSE(empty_cell.macro_f1.has_value());
    CHECK(empty_cell.error.find("empty") != std::string::npos);
    const auto& failed = report.cell("one-class", f.corpora[1].platform);
    CHECK_FALSE(failed.macro_f1.has_value());
    CHECK(failed.error.rfind("training failed", 0) == 0);
    CHECK(report.grid_tsv().find("FAILED") != std::string::npos);
    CHECK(plot::grid_svg(report, "grid").find(">failed<") != std::string::npos);
}

TEST_CASE("report round-trips through its table form") {
    EvalReport r;
    r.config_hash = "00112233aabbccdd";
    r.sources = {"GAB", "X"};
    r.targets = {"GAB", "X"};
    for (const auto& s : r.sources)
        for (const auto& t : r.targets) {
            GridCell c;
            c.source = s;
            c.target = t;
            c.n_examples = 17;
            if (s == "X" && t == "GAB") {
                c.error = "corpus\tbroken";
            } else {
                c.macro_f1 = 0.1 + 0.123456789012345 * static_cast<double>(s.size() + t.size());
                c.f1 = {0.25, 1.0 / 3.0};
            }
            r.cells.push_back(c);
        }
    const auto back = EvalReport::from_tsv(r.to_tsv());
    CHECK(back.config_hash == r.config_hash);
    CHECK(back.sources == r.sources);
    CHECK(back.targets == r.targets);
    for (std::size_t i = 0; i < r.cells.size(); ++i) {
        CHECK(back.cells[i].macro_f1 == r.cells[i].macro_f1);
        CHECK(back.cells[i].n_examples == 17);
        if (r.cells[i].macro_f1) CHECK(back.cells[i].f1 == r.cells[i].f1);
    }
    CHECK(back.cell("X", "GAB").error == "corpus broken");
    CHECK(back.to_tsv() == EvalReport::from_tsv(back.to_tsv()).to_tsv());
    CHECK_THROWS_AS(EvalReport::from_tsv("platform\thate\n"), DataError);
    CHECK(plot::grid_svg(r, "t") == plot::grid_svg(back, "t"));
}

TEST_CASE("latent export: counts, determinism, zero-noise mean and round-trip") {
    Fixture f;
    auto cfg = small_config();
    TrainOptions o;
    o.lexicon = &f.lexicon;
    const auto ckpt = train(f.corpora[0].records, cfg, o).best;
    const std::vector<NamedCorpus> corpora = {f.corpus(0), f.corpus(1)};
    const auto rows = export_latents(ckpt, corpora, 50, 9);
    REQUIRE(rows.size() == 100);
    CHECK(std::count_if(rows.begin(), rows.end(), [&](const LatentRow& r) { return r.platform == corpora[1].name; }) == 50);
    const auto again = export_latents(ckpt, corpora, 50, 9);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].causal == again[i].causal);

    // Causal rows are the mean of the posterior, via the single-text API.
    const Model model = ckpt.model();
    for (std::size_t i : {std::size_t{0}, std::size_t{77}}) {
        const auto& src = corpora[i < 50 ? 0 : 1].records;
        const auto it = std::find_if(src.begin(), src.end(), [&](const data::ExampleRecord& r) { return r.id == rows[i].id; });
        REQUIRE(it != src.end());
        const auto emb = model.encode(ckpt.vocab.encode(it->text, model.config().max_len));
        const auto latent = model.reparameterize(emb, std::vector<double>(static_cast<std::size_t>(model.config().h_causal), 0.0));
        for (std::size_t k = 0; k < rows[i].causal.size(); ++k) CHECK(rows[i].causal[k] == doctest::Approx(latent.mu[k]).epsilon(1e-9));
    }

    const auto path = std::filesystem::temp_directory_path() / "hatewatch_latents.tsv";
    write_latents(path, rows);
    const auto back = read_latents(path);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].platform == rows[i].platform);
        CHECK(back[i].hate == rows[i].hate);
        CHECK(back[i].causal == rows[i].causal);
        CHECK(back[i].target == rows[i].target);
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(export_latents(ckpt, corpora, 10000, 9), ConfigError);
}

TEST_CASE("distance ratio matches a hand-computed configuration") {
    // Class 0: A at {0, 1}, B at {3, 4}: cross mean 3, within mean 1.
    // Class 1: A at {10, 12}, B at {10, 12}: cross mean 1, within mean 2.
    // A-only class rows do not count.
    std::vector<LatentRow> rows = {row("A", 0, {0}),  row("A", 0, {1}),  row("B", 0, {3}), row("B", 0, {4}),
                                   row("A", 1, {10}), row("A", 1, {12}), row("B", 1, {10}), row("B", 1, {12})};
    const double cross = (3 + 4 + 2 + 3 + 0 + 2 + 2 + 0) / 8.0;
    const double within = (1 + 1 + 2 + 2) / 4.0;
    CHECK(distance_ratio(rows, LatentKind::Causal, "A", "B") == doctest::Approx(cross / within).epsilon(1e-12));
    CHECK(distance_ratio(rows, LatentKind::Target, "B", "A") == doctest::Approx(cross / within).epsilon(1e-12));
    CHECK_THROWS_AS(distance_ratio(rows, LatentKind::Causal, "A", "C"), DataError);
}

TEST_CASE("affinity rows hit the requested perplexity") {
    std::mt19937_64 rng(2);
    const Matrix x = testing::random_matrix(40, 3, rng);
    Matrix d(40, 40);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j)
            for (int k = 0; k < 3; ++k) d(i, j) += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
    const Matrix p = plot::conditional_affinities(d, 8.0);
    for (int i = 0; i < 40; ++i) {
        double sum = 0.0, h = 0.0;
        for (int j = 0; j < 40; ++j) {
            sum += p(i, j);
            if (p(i, j) > 0.0) h -= p(i, j) * std::log(p(i, j));
        }
        CHECK(p(i, i) == 0.0);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::exp(h) == doctest::Approx(8.0).epsilon(1e-6));
    }
}

TEST_CASE("projection is deterministic, separates clusters and refuses tiny inputs") {
    std::mt19937_64 rng(4);
    Matrix x(60, 5);
    for (int i = 0; i < 60; ++i)
        for (int k = 0; k < 5; ++k) x(i, k) = (i < 30 ? 0.0 : 20.0) + testing::random_matrix(1, 1, rng)(0, 0);
    plot::ProjectionOptions opts;
    opts.iterations = 400;
    opts.seed = 3;
    const Matrix a = plot::tsne(x, opts);
    const Matrix b = plot::tsne(x, opts);
    CHECK(testing::max_abs_diff(a, b) == 0.0);
    auto dist = [&](int i, int j) { return std::hypot(a(i, 0) - a(j, 0), a(i, 1) - a(j, 1)); };
    double within = 0.0, cross = 0.0;
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 30; ++j) {
            within += dist(i, j) + dist(30 + i, 30 + j);
            cross += 2.0 * dist(i, 30 + j);
        }
    CHECK(cross > 3.0 * within);
    opts.seed = 4;
    CHECK(testing::max_abs_diff(a, plot::tsne(x, opts)) > 0.0);

    try {
        plot::tsne(Matrix(2, 3), opts);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(std::to_string(plot::kMinProjectionPoints)) != std::string::npos);
    }
}

TEST_CASE("scatter image has one mark per point and a legend entry per group") {
    std::vector<plot::ScatterPoint> pts = {{0, 0, "A", true}, {1, 1, "B", false}, {2, 0.5, "A", false}};
    const auto svg = plot::scatter_svg(pts, "latents <test>");
    std::size_t circles = 0;
    for (auto pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++circles;
    CHECK(circles == 3 + 2);
    CHECK(svg.find("latents &lt;test&gt;") != std::string::npos);
    CHECK(svg.find("stroke=") != std::string::npos);
}
