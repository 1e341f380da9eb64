// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "doctest.h"
#include "hatewatch/errors.hpp"
#include "hatewatch/losses.hpp"
#include "hatewatch/model.hpp"
#include "test_util.hpp"

using namespace hatewatch;
using hatewatch::testing::finite_difference;
using hatewatch::testing::random_matrix;
using hatewatch::testing::relative_error;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.vocab_size = 20;
    c.max_len = 8;
    return c;
}

TokenSequence seq_of(std::vector<int> ids) {
    TokenSequence s;
    s.token_ids = std::move(ids);
    s.attention_mask.assign(s.token_ids.size(), 1);
    return s;
}

void zero_prefix(Model& m, const std::string& prefix) {
    for (auto& p : m.params().all())
        if (p.name.rfind(prefix, 0) == 0) p.value.fill(0.0);
}

nlohmann::json vec(const std::vector<double>& v) { return nlohmann::json(v); }

void check_close(const std::vector<double>& got, const nlohmann::json& want, double tol) {
    const auto w = want.get<std::vector<double>>();
    REQUIRE(got.size() == w.size());
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(got[i] - w[i]) <= tol);
}

}  // namespace

TEST_CASE("encode is deterministic and shape-stable") {
    Model m(small_config(), 1);
    auto a = m.encode(seq_of({1, 4, 5}));
    auto b = m.encode(seq_of({1, 4, 5}));
    CHECK(a.pooled == b.pooled);
    CHECK(a.sequence == b.sequence);
    for (int len = 1; len <= 8; ++len) {
        std::vector<int> ids(static_cast<std::size_t>(len), 7);
        ids[0] = 1;
        auto e = m.encode(seq_of(ids));
        CHECK(e.sequence.rows() == len);
        CHECK(e.sequence.cols() == 64);
        CHECK(e.pooled.size() == 64);
        auto c = m.reparameterize(e, std::vector<double>(64, 0.0));
        CHECK(c.mu.size() == 64);
        CHECK(m.target_head(e).vector.size() == 32);
        CHECK(m.recombine(c, m.target_head(e)).vector.size() == 64);
        CHECK(m.classify_target(m.target_head(e)).probs.size() == 9);
    }
    CHECK_THROWS_AS(m.encode(seq_of(std::vector<int>(9, 3))), LengthError);
    CHECK_THROWS_AS(m.encode(TokenSequence{}), DataError);
}

TEST_CASE("pooled vector is the first-position summary, or the masked mean") {
    Model m(small_config(), 2);
    auto e = m.encode(seq_of({1, 3, 9}));
    for (int c = 0; c < 64; ++c) CHECK(e.pooled[static_cast<std::size_t>(c)] == e.sequence(0, c));
    auto cfg = small_config();
    cfg.pooling = Pooling::Mean;
    Model mean_model(cfg, 2);
    auto em = mean_model.encode(seq_of({1, 3, 9}));
    for (int c = 0; c < 64; ++c)
        CHECK(em.pooled[static_cast<std::size_t>(c)] ==
              doctest::Approx((em.sequence(0, c) + em.sequence(1, c) + em.sequence(2, c)) / 3.0));
}

TEST_CASE("batched forward agrees with the single-example path, padding included") {
    Model m(small_config(), 3);
    std::vector<TokenSequence> seqs = {seq_of({1, 4}), seq_of({1, 5, 6, 7, 8})};
    auto batch = Batch::collate(seqs);
    CHECK(batch.seq == 5);
    Tape t = Tape::inference(m.params());
    auto v = m.forward(t, batch, {});
    for (int i = 0; i < 2; ++i) {
        auto e = m.encode(seqs[static_cast<std::size_t>(i)]);
        for (int c = 0; c < 64; ++c) CHECK(t.value(v.pooled)(i, c) == doctest::Approx(e.pooled[static_cast<std::size_t>(c)]).epsilon(1e-12));
        auto lat = m.reparameterize(e, std::vector<double>(64, 0.0));
        auto probs = m.hate_logits(lat);
        CHECK(t.value(v.hate_probs)(i, 1) == doctest::Approx(probs[1]).epsilon(1e-12));
    }
    CHECK(t.value(v.recon_probs).rows() == 10);
    CHECK(t.value(v.recon_probs).cols() == 20);
}

TEST_CASE("reparameterization") {
    Model m(small_config(), 4);
    auto e = m.encode(seq_of({1, 2, 3}));
    auto zero = m.reparameterize(e, std::vector<double>(64, 0.0));
    CHECK(zero.sample == zero.mu);
    for (int k : {0, 17, 63}) {
        std::vector<double> basis(64, 0.0);
        basis[static_cast<std::size_t>(k)] = 1.0;
        auto c = m.reparameterize(e, basis);
        for (int i = 0; i < 64; ++i) {
            const double d = c.sample[static_cast<std::size_t>(i)] - c.mu[static_cast<std::size_t>(i)];
            if (i == k) CHECK(d == doctest::Approx(c.sigma[static_cast<std::size_t>(k)]).epsilon(1e-12));
            else CHECK(d == 0.0);
        }
    }
    CHECK_THROWS_AS(m.reparameterize(e, std::vector<double>(3, 0.0)), ConfigError);
}

TEST_CASE("Gaussian sampler mean matches mu") {
    Model m(small_config(), 5);
    auto e = m.encode(seq_of({1, 6}));
    auto base = m.reparameterize(e, std::vector<double>(64, 0.0));
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n(0.0, 1.0);
    const int draws = 100000;
    std::vector<double> mean(64, 0.0), noise(64);
    for (int d = 0; d < draws; ++d) {
        for (double& x : noise) x = n(rng);
        // sample = mu + sigma * eps, applied directly to avoid 1e5 network passes.
        for (int k = 0; k < 64; ++k)
            mean[static_cast<std::size_t>(k)] +=
                (base.mu[static_cast<std::size_t>(k)] + base.sigma[static_cast<std::size_t>(k)] * noise[static_cast<std::size_t>(k)]) / draws;
    }
    auto check = m.reparameterize(e, noise);
    for (int k = 0; k < 64; ++k)
        CHECK(check.sample[static_cast<std::size_t>(k)] ==
              doctest::Approx(base.mu[static_cast<std::size_t>(k)] + base.sigma[static_cast<std::size_t>(k)] * noise[static_cast<std::size_t>(k)]));
    for (int k = 0; k < 64; ++k)
        CHECK(std::abs(mean[static_cast<std::size_t>(k)] - base.mu[static_cast<std::size_t>(k)]) <=
              3.0 * base.sigma[static_cast<std::size_t>(k)] / std::sqrt(static_cast<double>(draws)));
}

TEST_CASE("sigma stays positive") {
    Model m(small_config(), 6);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    Embedding e;
    e.pooled.resize(64);
    for (int trial = 0; trial < 10000; ++trial) {
        for (double& x : e.pooled) x = u(rng);
        auto c = m.reparameterize(e, std::vector<double>(64, 0.0));
        for (double s : c.sigma) REQUIRE(s > 0.0);
    }
}

TEST_CASE("zero maps give zero and uniform outputs") {
    Model m(small_config(), 7);
    Embedding zero;
    zero.pooled.assign(64, 0.0);
    for (double v : m.target_head(zero).vector) CHECK(v == 0.0);
    zero_prefix(m, Model::kClassifierPrefix);
    auto label = m.classify_target(TargetLatent{std::vector<double>(32, 0.7)});
    for (double p : label.probs) CHECK(p == doctest::Approx(1.0 / 9.0));
    CHECK(label.confidence == doctest::Approx(0.0).epsilon(1e-12));
    zero_prefix(m, "hate.");
    auto hp = m.hate_logits(CausalLatent{{}, {}, std::vector<double>(64, 1.5)});
    CHECK(hp[0] == doctest::Approx(0.5));
    CHECK(hp[1] == doctest::Approx(0.5));
}

TEST_CASE("recombine concatenates causal first, then target") {
    auto cfg = small_config();
    cfg.h_causal = 2;
    cfg.h_disc = 2;
    cfg.decoder_dim = 4;
    cfg.decoder_heads = 2;
    Model m(cfg, 8);
    auto& w = m.params().at(m.params().index_of("rec.w")).value;
    w.fill(0.0);
    for (int i = 0; i < 4; ++i) w(i, i) = 1.0;
    auto out = m.recombine(CausalLatent{{1, 0}, {1, 1}, {1, 0}}, TargetLatent{{0, 2}});
    CHECK(out.vector == std::vector<double>{1, 0, 0, 2});
    auto z = m.recombine(CausalLatent{{0, 0}, {1, 1}, {0, 0}}, TargetLatent{{0, 0}});
    CHECK(z.vector == std::vector<double>{0, 0, 0, 0});
    CHECK_THROWS_AS(m.recombine(CausalLatent{{1}, {1}, {1}}, TargetLatent{{0, 2}}), ConfigError);
}

TEST_CASE("hate loss never reaches the target head") {
    Model m(small_config(), 9);
    std::vector<TokenSequence> seqs = {seq_of({1, 4, 5}), seq_of({1, 6})};
    auto batch = Batch::collate(seqs);
    std::mt19937_64 rng(1);
    ForwardOptions opts;
    opts.train = true;
    opts.rng = &rng;
    opts.noise = random_matrix(2, 64, rng);
    m.params().zero_grad();
    Tape t(&m.params());
    auto v = m.forward(t, batch, opts);
    const std::vector<int> labels = {1, 0};
    auto g = losses::hate_loss_grad(t.value(v.hate_probs), labels);
    t.backward(ad::external_scalar(t, g.value, {v.hate_probs}, {g.grad}));
    double touched = 0.0;
    for (const auto& p : m.params().all()) {
        double n = 0.0;
        for (std::size_t i = 0; i < p.grad.size(); ++i) n += std::abs(p.grad[i]);
        if (p.name.rfind(Model::kTargetHeadPrefix, 0) == 0 || p.name.rfind(Model::kClassifierPrefix, 0) == 0 ||
            p.name.rfind("rec.", 0) == 0 || p.name.rfind("dec.", 0) == 0)
            CHECK_MESSAGE(n == 0.0, std::string(p.name));
        if (p.name.rfind("head.mu.", 0) == 0) touched += n;
    }
    CHECK(touched > 0.0);
}

TEST_CASE("ablation head reads the pooled embedding") {
    auto cfg = small_config();
    cfg.hate_input = HateInput::Pooled;
    Model m(cfg, 10);
    CHECK(m.params().at(m.params().index_of("hate.w")).value.rows() == 64);
    CHECK_THROWS_AS(m.hate_logits(CausalLatent{{}, {}, std::vector<double>(64, 0.0)}), ConfigError);
}

TEST_CASE("end-to-end parameter gradients match finite differences") {
    auto cfg = small_config();
    cfg.h_d = 8;
    cfg.heads = 2;
    cfg.ffn = 12;
    cfg.h_causal = 4;
    cfg.h_disc = 3;
    cfg.n_classes = 3;
    cfg.decoder_dim = 6;
    cfg.decoder_heads = 2;
    cfg.decoder_ffn = 10;
    cfg.head_depth = 2;
    cfg.head_hidden = 5;
    cfg.vocab_size = 9;
    cfg.dropout = 0.0;
    Model m(cfg, 11);
    std::vector<TokenSequence> seqs = {seq_of({1, 4, 5, 2}), seq_of({1, 6, 8})};
    auto batch = Batch::collate(seqs);
    std::mt19937_64 rng(3);
    Matrix noise = random_matrix(2, 4, rng);
    Matrix mix_recon = random_matrix(8, 9, rng);
    Matrix mix_hate = random_matrix(2, 2, rng);
    Matrix mix_target = random_matrix(2, 3, rng);
    Matrix mix_sigma = random_matrix(2, 4, rng);

    auto objective = [&](Tape& t) {
        ForwardOptions opts;
        opts.noise = noise;
        auto v = m.forward(t, batch, opts);
        std::vector<Var> terms;
        for (auto [x, w] : {std::pair{v.recon_probs, &mix_recon}, {v.hate_probs, &mix_hate}, {v.target_probs, &mix_target},
                            {v.sigma, &mix_sigma}}) {
            Var prod = ad::mul(t, x, t.constant(*w));
            Var ones_r = t.constant(Matrix(1, t.value(prod).rows(), 1.0));
            Var ones_c = t.constant(Matrix(t.value(prod).cols(), 1, 1.0));
            terms.push_back(ad::matmul(t, ad::matmul(t, ones_r, prod), ones_c));
        }
        std::vector<double> coeffs(terms.size(), 1.0);
        return ad::weighted_sum(t, terms, coeffs);
    };

    m.params().zero_grad();
    Tape t(&m.params());
    t.backward(objective(t));
    for (const char* name : {"enc.tok_emb", "enc.l0.q.w", "enc.l1.ff1.w", "enc.ln.g", "head.mu.0.w", "head.logvar.1.b",
                             "head.pi.0.w", "clf.w", "rec.w", "dec.tok_emb", "dec.l0.k.w", "dec.lm.w", "hate.w"}) {
        const int id = m.params().index_of(name);
        auto f = [&](const Matrix& x) {
            Matrix saved = m.params().at(id).value;
            m.params().at(id).value = x;
            Tape ft = Tape::inference(m.params());
            const double r = ft.value(objective(ft))(0, 0);
            m.params().at(id).value = saved;
            return r;
        };
        auto numeric = finite_difference(f, m.params().at(id).value, 1e-6);
        CHECK_MESSAGE(relative_error(m.params().at(id).grad, numeric) < 1e-5, std::string(name));
    }
}

TEST_CASE("concat_rows gradient") {
    std::mt19937_64 rng(5);
    Matrix a = random_matrix(2, 3, rng), b = random_matrix(3, 3, rng), w = random_matrix(5, 3, rng);
    auto run = [&](const Matrix& av, Var* out_a, Tape& t) {
        Var va = t.input(av);
        if (out_a) *out_a = va;
        Var c = ad::concat_rows(t, va, t.constant(b));
        Var p = ad::mul(t, c, t.constant(w));
        return ad::matmul(t, ad::matmul(t, t.constant(Matrix(1, 5, 1.0)), p), t.constant(Matrix(3, 1, 1.0)));
    };
    Tape t;
    Var va;
    t.backward(run(a, &va, t));
    auto numeric = finite_difference([&](const Matrix& x) { Tape ft; return ft.value(run(x, nullptr, ft))(0, 0); }, a);
    CHECK(relative_error(t.grad(va), numeric) < 1e-8);
}

TEST_CASE("toy backend matches the frozen reference outputs") {
    const auto path = std::filesystem::path(HATEWATCH_TEST_DIR) / "golden" / "toy_seed0.json";
    Model m(small_config(), 0);
    auto e = m.encode(seq_of({1, 4, 5, 6}));
    auto c = m.reparameterize(e, std::vector<double>(64, 0.0));
    auto tl = m.target_head(e);
    nlohmann::json now = {{"pooled", vec(e.pooled)},
                          {"mu", vec(c.mu)},
                          {"sigma", vec(c.sigma)},
                          {"target", vec(tl.vector)},
                          {"recombined", vec(m.recombine(c, tl).vector)},
                          {"target_probs", vec(m.classify_target(tl).probs)},
                          {"hate_probs", vec(m.hate_logits(c))}};
    if (!std::filesystem::exists(path)) {
        REQUIRE_MESSAGE(std::getenv("HATEWATCH_WRITE_GOLDEN") != nullptr, "golden file missing: " << path);
        std::ofstream(path) << now.dump(1) << '\n';
    }
    std::ifstream in(path);
    auto golden = nlohmann::json::parse(in);
    for (const auto& [key, value] : now.items()) {
        INFO(key);
        check_close(value.get<std::vector<double>>(), golden.at(key), 1e-9);
    }
}
