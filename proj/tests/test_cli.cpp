// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hatewatch/eval.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code = -1;
    std::string output;
};

Result run(const std::string& args) {
    const std::string cmd = std::string(HATEWATCH_CLI) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    Result r;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// Scratch directory with a small synthetic corpus and a fast config.
struct Workspace {
    fs::path dir;

    Workspace() : dir(fs::temp_directory_path() / "hatewatch_cli_test") {
        static bool ready = false;
        if (ready) return;
        fs::remove_all(dir);
        fs::create_directories(dir);
        REQUIRE(run("synth --n 200 --seed 2 --out " + (dir / "syn").string()).code == 0);
        std::ofstream(dir / "small.json") << json{{"max_steps", 6},
                                                  {"eval_every", 3},
                                                  {"batch_size", 16},
                                                  {"model",
                                                   {{"h_d", 32},
                                                    {"layers", 1},
                                                    {"heads", 2},
                                                    {"h_causal", 16},
                                                    {"h_disc", 8},
                                                    {"decoder_dim", 32}}}}
                                                 .dump();
        ready = true;
    }
    std::string path(const std::string& rel) const { return (dir / rel).string(); }
    std::string a() const { return path("syn/synthetic-a.jsonl"); }
    std::string b() const { return path("syn/synthetic-b.jsonl"); }
};

}  // namespace

TEST_CASE("prepare prints the summary and is idempotent") {
    Workspace ws;
    const std::string gab = std::string(HATEWATCH_TEST_DIR) + "/fixtures/corpora/gab_small.csv";
    const auto r1 = run("prepare --platform GAB " + gab + " --out " + ws.path("gab.jsonl"));
    CHECK(r1.code == 0);
    CHECK(r1.output.find("GAB: 3 posts, 66.7% hateful") != std::string::npos);
    CHECK(r1.output.find(":5:") != std::string::npos);  // malformed row diagnosed with its line
    const auto first = slurp(ws.path("gab.jsonl"));
    REQUIRE(run("prepare --platform GAB " + gab + " --out " + ws.path("gab.jsonl")).code == 0);
    CHECK(slurp(ws.path("gab.jsonl")) == first);
    const auto summary = read_json(ws.path("gab.jsonl.summary.json"));
    CHECK(summary.at("n_posts") == 3);
    CHECK(summary.at("malformed_rows") == 1);
    CHECK(fs::exists(ws.path("gab.jsonl.manifest.json")));
}

TEST_CASE("prepare rejects a bad schema with diagnostics") {
    Workspace ws;
    std::ofstream(ws.path("no_text.csv")) << "id,body,label\n1,hello,1\n";
    const auto missing = run("prepare --platform GAB " + ws.path("no_text.csv") + " --out " + ws.path("x.jsonl"));
    CHECK(missing.code == 2);
    CHECK(missing.output.find("text") != std::string::npos);

    std::ofstream(ws.path("bad_labels.csv")) << "id,text,label\n1,hello,maybe\n2,there,perhaps\n";
    const auto rejected = run("prepare --platform GAB " + ws.path("bad_labels.csv") + " --out " + ws.path("y.jsonl"));
    CHECK(rejected.code == 2);
    CHECK(rejected.output.find(":2:") != std::string::npos);
    CHECK(rejected.output.find(":3:") != std::string::npos);
}

TEST_CASE("train resolves defaults into the manifest and reproduces itself") {
    Workspace ws;
    const auto r = run("train --quiet --config " + ws.path("small.json") + " --source " + ws.a() + " --out " + ws.path("run1"));
    REQUIRE(r.code == 0);
    const auto manifest = read_json(ws.path("run1/manifest.json"));
    const auto& cfg = manifest.at("resolved_config");
    CHECK(cfg.at("lr") == 1e-4);
    CHECK(cfg.at("alpha_t") == 0.05);
    CHECK(cfg.at("alpha_c") == 0.05);
    CHECK(cfg.at("delta_cont") == 0.001);
    CHECK(cfg.at("delta_conf") == 0.001);
    CHECK(cfg.at("eta") == 0.95);
    CHECK(cfg.at("beta") == 2.0);
    CHECK(cfg.at("dropout") == 0.2);
    CHECK(cfg.at("model").at("h_d") == 32);
    CHECK(manifest.at("exit_code") == 0);
    CHECK(manifest.at("inputs").size() >= 3);

    // Same config twice, and a re-run from the manifest alone.
    REQUIRE(run("train --quiet --config " + ws.path("small.json") + " --source " + ws.a() + " --out " + ws.path("run2")).code == 0);
    REQUIRE(run("train --quiet --config " + ws.path("run1/manifest.json") + " --source " + ws.a() + " --out " + ws.path("run3")).code == 0);
    const auto m1 = read_json(ws.path("run1/metrics.json"));
    for (const char* other : {"run2", "run3"}) {
        const auto m = read_json(ws.path(std::string(other) + "/metrics.json"));
        REQUIRE(m.at("validation").size() == m1.at("validation").size());
        for (std::size_t i = 0; i < m.at("validation").size(); ++i)
            CHECK(m.at("validation")[i].at("macro_f1").get<double>() ==
                  doctest::Approx(m1.at("validation")[i].at("macro_f1").get<double>()).epsilon(1e-6));
    }
    CHECK(read_json(ws.path("run3/config.json")).at("config_hash") == read_json(ws.path("run1/config.json")).at("config_hash"));
}

TEST_CASE("flags override the config file") {
    Workspace ws;
    REQUIRE(run("train --quiet --config " + ws.path("small.json") + " --max-steps 0 --seed 9 --source " + ws.a() +
                " --out " + ws.path("init"))
                .code == 0);
    const auto manifest = read_json(ws.path("init/manifest.json"));
    CHECK(manifest.at("resolved_config").at("max_steps") == 0);
    CHECK(manifest.at("seed") == 9);
    const auto metrics = read_json(ws.path("init/metrics.json"));
    CHECK(metrics.at("step") == 0);
    CHECK(fs::exists(ws.path("init/params.bin")));
}

TEST_CASE("unknown config keys exit with the key name") {
    Workspace ws;
    std::ofstream(ws.path("bad.json")) << R"({"alpha_x": 1})";
    const auto r = run("train --config " + ws.path("bad.json") + " --source " + ws.a() + " --out " + ws.path("bad"));
    CHECK(r.code == 1);
    CHECK(r.output.find("alpha_x") != std::string::npos);
    CHECK(run("train --source " + ws.a()).code == 1);  // missing --out
    CHECK(run("frobnicate").code == 1);
}

TEST_CASE("grid fills a 2x2 report and signals partial failure") {
    Workspace ws;
    const std::string common = "grid --quiet --config " + ws.path("small.json") + " --source " + ws.a() + " --source " + ws.b();
    const auto r = run(common + " --target " + ws.a() + " --target " + ws.b() + " --out " + ws.path("grid"));
    REQUIRE(r.code == 0);
    const auto report = hatewatch::EvalReport::from_tsv(slurp(ws.path("grid/report.tsv")));
    CHECK(report.cells.size() == 4);
    CHECK(report.complete());
    CHECK(fs::exists(ws.path("grid/checkpoints/synthetic-a/params.bin")));

    REQUIRE(run("plot --report " + ws.path("grid/report.tsv") + " --out " + ws.path("g1")).code == 0);
    REQUIRE(run("plot --report " + ws.path("grid/report.tsv") + " --out " + ws.path("g2")).code == 0);
    CHECK(slurp(ws.path("g1.svg")) == slurp(ws.path("g2.svg")));
    CHECK(slurp(ws.path("g1.svg")).find("<svg") == 0);

    std::ofstream(ws.path("empty.jsonl")).flush();
    const auto partial = run(common + " --target " + ws.path("empty.jsonl") + " --out " + ws.path("grid_partial"));
    CHECK(partial.code == 3);
    CHECK(partial.output.find("FAILED") != std::string::npos);
}

TEST_CASE("weaklabel: lexicon is deterministic, replay matches the fixture, live refuses") {
    Workspace ws;
    REQUIRE(run("weaklabel --corpus " + ws.a() + " --out " + ws.path("wl1.jsonl")).code == 0);
    REQUIRE(run("weaklabel --corpus " + ws.a() + " --out " + ws.path("wl2.jsonl")).code == 0);
    CHECK(slurp(ws.path("wl1.jsonl")) == slurp(ws.path("wl2.jsonl")));

    // Corpus whose posts are the replay fixture's posts.
    const std::string replay = std::string(HATEWATCH_TEST_DIR) + "/fixtures/llm_replay.jsonl";
    std::ifstream in(replay);
    std::ofstream corpus(ws.path("replay_corpus.jsonl"));
    std::map<std::string, std::string> response;
    std::string line;
    int i = 0;
    while (std::getline(in, line)) {
        const auto j = json::parse(line);
        response["r" + std::to_string(i)] = j.at("response");
        corpus << json{{"id", "r" + std::to_string(i)}, {"text", j.at("post")}, {"hate", 1}, {"platform", "X"}}.dump() << '\n';
        ++i;
    }
    corpus.close();
    const auto r = run("weaklabel --labeler llm --replay " + replay + " --corpus " + ws.path("replay_corpus.jsonl") +
                       " --out " + ws.path("wl_llm.jsonl"));
    REQUIRE(r.code == 0);
    std::ifstream labeled(ws.path("wl_llm.jsonl"));
    int matched = 0, unparsed = 0;
    while (std::getline(labeled, line)) {
        const auto j = json::parse(line);
        if (j.at("provenance") == "llm") {
            CHECK(j.at("target") == response.at(j.at("id")));
            ++matched;
        } else {
            CHECK(j.at("provenance") == "llm-unparsed");
            CHECK(j.at("target").is_null());
            ++unparsed;
        }
    }
    CHECK(matched == 101);
    CHECK(unparsed == 1);

    unsetenv("HATEWATCH_LLM_API_KEY");
    const auto live = run("weaklabel --labeler llm --corpus " + ws.a() + " --out " + ws.path("wl_live.jsonl"));
    CHECK(live.code == 1);
    CHECK(live.output.find("HATEWATCH_LLM_API_KEY") != std::string::npos);
}

TEST_CASE("export and plot produce reproducible projections") {
    Workspace ws;
    REQUIRE(run("train --quiet --config " + ws.path("small.json") + " --source " + ws.a() + " --out " + ws.path("exp")).code == 0);
    const auto ex = run("export --checkpoint " + ws.path("exp") + " --corpus " + ws.a() + " --corpus " + ws.b() +
                        " --n 40 --out " + ws.path("lat.tsv"));
    REQUIRE(ex.code == 0);
    CHECK(ex.output.find("80 latent rows") != std::string::npos);
    CHECK(hatewatch::read_latents(ws.path("lat.tsv")).size() == 80);

    const std::string plot = "plot --latents " + ws.path("lat.tsv") + " --iterations 200 --seed 4 --out ";
    REQUIRE(run(plot + ws.path("p1")).code == 0);
    REQUIRE(run(plot + ws.path("p2")).code == 0);
    CHECK(slurp(ws.path("p1.coords.tsv")) == slurp(ws.path("p2.coords.tsv")));
    CHECK(slurp(ws.path("p1.coords.tsv")).rfind("platform\thate\tid\tx\ty\n", 0) == 0);
    CHECK(fs::exists(ws.path("p1.svg")));

    // Keep the header and two rows.
    std::istringstream all(slurp(ws.path("lat.tsv")));
    std::ofstream tiny(ws.path("tiny.tsv"));
    std::string line;
    for (int k = 0; k < 3 && std::getline(all, line); ++k) tiny << line << '\n';
    tiny.close();
    const auto refused = run("plot --latents " + ws.path("tiny.tsv") + " --out " + ws.path("tiny"));
    CHECK(refused.code == 2);
    CHECK(refused.output.find("at least 5") != std::string::npos);
    CHECK(run("export --checkpoint " + ws.path("exp") + " --corpus " + ws.a() + " --n 5000 --out " + ws.path("x.tsv")).code == 1);
}
