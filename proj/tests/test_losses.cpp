// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "doctest.h"
#include "hatewatch/errors.hpp"
#include "hatewatch/losses.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace hatewatch;
using namespace hatewatch::losses;
using hatewatch::testing::finite_difference;
using hatewatch::testing::random_matrix;
using hatewatch::testing::random_probs;
using hatewatch::testing::relative_error;

namespace {

LabeledLatent member(std::vector<double> z, std::vector<double> probs) {
    return LabeledLatent{TargetLatent{std::move(z)}, make_soft_label(std::move(probs))};
}

HighConfidenceSet set_of(const Matrix& z, const Matrix& probs) {
    HighConfidenceSet s;
    for (int i = 0; i < z.rows(); ++i) {
        s.members.push_back(member({z.row(i).begin(), z.row(i).end()}, {probs.row(i).begin(), probs.row(i).end()}));
        s.batch_index.push_back(static_cast<std::size_t>(i));
    }
    return s;
}

std::vector<int> argmaxes(const Matrix& probs) {
    std::vector<int> out;
    for (int r = 0; r < probs.rows(); ++r) out.push_back(argmax(probs.row(r)));
    return out;
}

}  // namespace

TEST_CASE("confidence_weight") {
    CHECK(confidence_weight(std::vector<double>(9, 1.0 / 9)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(confidence_weight(std::vector<double>{0.25, 0.25, 0.25, 0.25}) == doctest::Approx(0.0));
    CHECK(confidence_weight(std::vector<double>{0, 0, 1, 0}) == 1.0);
    // -sum p ln p / ln 2 evaluated independently: 0.5310044
    CHECK(confidence_weight(std::vector<double>{0.9, 0.1}) == doctest::Approx(0.531).epsilon(0.001 / 0.531));
    CHECK_THROWS_AS(confidence_weight(std::vector<double>{1.0}), ConfigError);
}

TEST_CASE("select_high_confidence") {
    std::vector<LabeledLatent> batch;
    for (double c : {0.2, 0.96, 0.95}) {
        LabeledLatent m;
        m.label.probs = {0.5, 0.5};
        m.label.confidence = c;
        batch.push_back(m);
    }
    SUBCASE("eta 0 keeps everything") { CHECK(select_high_confidence(batch, 0.0).size() == 3); }
    SUBCASE("threshold 0.95 keeps members 2 and 3 in order") {
        auto s = select_high_confidence(batch, 0.95);
        REQUIRE(s.size() == 2);
        CHECK(s.batch_index == std::vector<std::size_t>{1, 2});
        CHECK(s.members[0].label.confidence == 0.96);
    }
    SUBCASE("eta 1 with no one-hot labels is empty") {
        std::vector<LabeledLatent> soft = {member({0}, {0.7, 0.3}), member({0}, {0.99, 0.01})};
        CHECK(select_high_confidence(soft, 1.0).empty());
    }
}

TEST_CASE("pair_similarity") {
    std::vector<double> onehot3(9, 0.0);
    onehot3[3] = 1.0;
    CHECK(pair_similarity(make_soft_label(onehot3), make_soft_label(onehot3)) == 1);
    std::vector<double> a(9, 0.0), b(9, 0.0);
    a[2] = 1.0;
    b[5] = 1.0;
    CHECK(pair_similarity(make_soft_label(a), make_soft_label(b)) == 0);
    // tie (0.5, 0.5) resolves to class 0
    CHECK(pair_similarity(make_soft_label({0.5, 0.5}), make_soft_label({0.6, 0.4})) == 1);
}

TEST_CASE("contrastive_pair") {
    std::vector<double> o = {0.0, 0.0}, far = {3.0, 0.0}, near = {0.5, 0.0};
    CHECK(contrastive_pair(o, o, 1, 2.0) == 0.0);
    CHECK(contrastive_pair(o, far, 0, 2.0) == 0.0);
    CHECK(contrastive_pair(o, o, 0, 2.0) == 4.0);
    CHECK(contrastive_pair(o, near, 0, 2.0) == doctest::Approx(2.25));
}

TEST_CASE("contrastive_pair properties: symmetry and margin saturation") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> a(4), b(4);
        for (auto& v : a) v = u(rng);
        for (auto& v : b) v = u(rng);
        for (int w : {0, 1}) CHECK(contrastive_pair(a, b, w, 2.0) == contrastive_pair(b, a, w, 2.0));
    }
    double prev = 1e300;
    for (double d = 0.0; d <= 3.0; d += 0.01) {
        const double l = contrastive_pair(std::vector<double>{0.0}, std::vector<double>{d}, 0, 2.0);
        CHECK(l <= prev);
        if (d >= 2.0) CHECK(l == 0.0);
        prev = l;
    }
}

TEST_CASE("contrastive_loss") {
    HighConfidenceSet empty;
    CHECK(contrastive_loss(empty, 2.0) == 0.0);
    HighConfidenceSet one;
    one.members.push_back(member({1, 2}, {1, 0}));
    CHECK(contrastive_loss(one, 2.0) == 0.0);

    HighConfidenceSet two;
    two.members.push_back(member({0, 0}, {1, 0}));
    two.members.push_back(member({0.3, 0.4}, {0.9, 0.1}));
    CHECK(contrastive_loss(two, 2.0) == doctest::Approx(2.0 * 0.25));

    std::mt19937_64 rng(9);
    for (int size = 2; size <= 8; ++size) {
        Matrix z = random_matrix(size, 5, rng), p = random_probs(size, 4, rng);
        auto s = set_of(z, p);
        CHECK(contrastive_loss(s, 2.0) ==
              doctest::Approx(oracle::contrastive(oracle::rows_of(z), argmaxes(p), 2.0)).epsilon(1e-9));
    }
}

TEST_CASE("conf_regularizer and target_loss") {
    HighConfidenceSet s;
    s.members.push_back(member({0}, {0.5, 0.5}));
    CHECK(conf_regularizer(s, Matrix(1, 2, 0.5)) == doctest::Approx(0.0));
    CHECK(conf_regularizer(s, Matrix(1, 2, std::vector<double>{0.75, 0.25})) ==
          doctest::Approx(0.1438).epsilon(1e-3 / 0.1438));
    CHECK(conf_regularizer(HighConfidenceSet{}, Matrix()) == 0.0);

    HighConfidenceSet t;
    t.members.push_back(member({0}, {0.2, 0.8}));
    t.members.push_back(member({0}, {0.6, 0.4}));
    CHECK(target_loss(t, Matrix(2, 2, std::vector<double>{0.2, 0.8, 0.6, 0.4})) == doctest::Approx(0.0));

    HighConfidenceSet zero_weight;
    zero_weight.members.push_back(LabeledLatent{TargetLatent{{0}}, SoftLabel{{0.5, 0.5}, 0.0}});
    CHECK(target_loss(zero_weight, Matrix(1, 2, std::vector<double>{0.99, 0.01})) == 0.0);
    CHECK(target_loss(HighConfidenceSet{}, Matrix()) == 0.0);

    std::mt19937_64 rng(17);
    Matrix pseudo = random_probs(5, 9, rng), f = random_probs(5, 9, rng);
    auto rs = set_of(Matrix(5, 1), pseudo);
    CHECK(target_loss(rs, f) == doctest::Approx(oracle::target(oracle::rows_of(pseudo), oracle::rows_of(f))).epsilon(1e-9));
}

TEST_CASE("recon_loss") {
    TokenSequence seq{{3, 1, 4, 1}, {1, 1, 1, 1}};
    Matrix perfect(4, 10);
    for (int i = 0; i < 4; ++i) perfect(i, seq.token_ids[static_cast<std::size_t>(i)]) = 1.0;
    CHECK(recon_loss(seq, perfect) == 0.0);
    CHECK(recon_loss(seq, Matrix(4, 10, 0.1)) == doctest::Approx(9.2103).epsilon(1e-3 / 9.2103));
    TokenSequence masked{{3, 1, 4, 1}, {0, 0, 0, 0}};
    CHECK(recon_loss(masked, Matrix(4, 10, 0.1)) == 0.0);
    TokenSequence bad{{3, 10}, {1, 1}};
    CHECK_THROWS_AS(recon_loss(bad, Matrix(2, 10, 0.1)), DataError);
}

TEST_CASE("kl_causal") {
    CHECK(kl_causal(CausalLatent{{0, 0, 0}, {1, 1, 1}, {}}) == 0.0);
    CHECK(kl_causal(CausalLatent{{1}, {1}, {}}) == doctest::Approx(0.5));
    CausalLatent c{{0.3, -0.7, 1.1}, {0.6, 1.4, 0.9}, {}};
    const double mc = oracle::gaussian_kl_mc(c.mu, c.sigma, 1'000'000, 123);
    CHECK(std::abs(kl_causal(c) - mc) <= 0.01 * kl_causal(c));
}

TEST_CASE("hate_loss") {
    std::vector<int> y = {1, 0, 1};
    Matrix perfect(3, 2, std::vector<double>{0, 1, 1, 0, 0, 1});
    CHECK(hate_loss(perfect, y) == 0.0);
    CHECK(hate_loss(Matrix(3, 2, 0.5), y) == doctest::Approx(0.6931).epsilon(1e-4 / 0.6931));
    std::mt19937_64 rng(2);
    Matrix p = random_probs(16, 2, rng);
    std::vector<int> labels(16);
    for (int i = 0; i < 16; ++i) labels[static_cast<std::size_t>(i)] = i % 3 == 0;
    CHECK(hate_loss(p, labels) == doctest::Approx(oracle::nll_mean(oracle::rows_of(p), labels)).epsilon(1e-12));
    CHECK_THROWS_AS(hate_loss(p, std::vector<int>{1}), ConfigError);
}

TEST_CASE("compose_losses") {
    LossCoefficients k;
    auto zero = compose_losses(LossParts{}, k);
    CHECK(zero.vae == 0.0);
    CHECK(zero.total == 0.0);

    auto b = compose_losses(LossParts{1, 1, 1, 1, 1, 0}, k);
    CHECK(b.vae == doctest::Approx(1.1001).epsilon(1e-12));
    CHECK(b.audit(k));

    LossParts bad;
    bad.recon = std::nan("");
    try {
        compose_losses(bad, k);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.term() == "recon");
    }
}

TEST_CASE("every loss term is non-negative on random inputs") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> n_dist(0, 6), c_dist(2, 9);
    for (int trial = 0; trial < 10'000; ++trial) {
        const int n = n_dist(rng), c = c_dist(rng);
        Matrix z = random_matrix(n, 3, rng, -2, 2), pseudo = random_probs(n, c, rng), f = random_probs(n, c, rng);
        auto s = set_of(z, pseudo);
        REQUIRE(contrastive_loss(s, 2.0) >= 0.0);
        REQUIRE(conf_regularizer(s, f) >= 0.0);
        REQUIRE(target_loss(s, f) >= 0.0);
        if (n > 0) {
            Matrix sig = random_matrix(n, 3, rng, 0.1, 3.0);
            REQUIRE(kl_causal_grad(z, sig).value >= 0.0);
            std::vector<int> ids(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
            std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 1);
            for (int i = 0; i < n; ++i) {
                ids[static_cast<std::size_t>(i)] = i % c;
                y[static_cast<std::size_t>(i)] = i % 2;
            }
            REQUIRE(recon_loss_grad(f, ids, mask, 1).value >= 0.0);
            REQUIRE(hate_loss(random_probs(n, 2, rng), y) >= 0.0);
        }
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        // contrastive: keep pairs away from d = 0 and d = beta kinks
        Matrix z = random_matrix(6, 4, rng, -1.2, 1.2);
        std::vector<int> cls = {0, 1, 0, 2, 1, 0};
        auto g = contrastive_loss_grad(z, cls, 2.0).grad;
        auto fd = finite_difference([&](const Matrix& x) { return contrastive_loss_grad(x, cls, 2.0).value; }, z);
        CHECK(relative_error(g, fd) < 1e-3);

        Matrix f = random_probs(5, 9, rng), pseudo = random_probs(5, 9, rng);
        CHECK(relative_error(conf_regularizer_grad(f).grad,
                             finite_difference([](const Matrix& x) { return conf_regularizer_grad(x).value; }, f)) < 1e-3);
        std::vector<double> w = {0.1, 0.9, 0.5, 1.0, 0.3};
        CHECK(relative_error(target_loss_grad(pseudo, w, f).grad,
                             finite_difference([&](const Matrix& x) { return target_loss_grad(pseudo, w, x).value; }, f)) <
              1e-3);

        Matrix probs = random_probs(6, 7, rng);
        std::vector<int> ids = {1, 6, 0, 3, 3, 2};
        std::vector<std::uint8_t> mask = {1, 1, 0, 1, 1, 1};
        CHECK(relative_error(recon_loss_grad(probs, ids, mask, 2).grad,
                             finite_difference([&](const Matrix& x) { return recon_loss_grad(x, ids, mask, 2).value; },
                                               probs)) < 1e-3);

        Matrix mu = random_matrix(3, 4, rng), sigma = random_matrix(3, 4, rng, 0.3, 2.0);
        auto kg = kl_causal_grad(mu, sigma);
        CHECK(relative_error(kg.dmu, finite_difference([&](const Matrix& x) { return kl_causal_grad(x, sigma).value; }, mu)) <
              1e-3);
        CHECK(relative_error(kg.dsigma,
                             finite_difference([&](const Matrix& x) { return kl_causal_grad(mu, x).value; }, sigma)) < 1e-3);

        Matrix hp = random_probs(8, 2, rng);
        std::vector<int> y = {0, 1, 1, 0, 1, 0, 0, 1};
        CHECK(relative_error(hate_loss_grad(hp, y).grad,
                             finite_difference([&](const Matrix& x) { return hate_loss_grad(x, y).value; }, hp)) < 1e-3);
    }
}
