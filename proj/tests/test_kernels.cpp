// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "doctest.h"
#include "hatewatch/autodiff.hpp"
#include "hatewatch/kernels.hpp"
#include "test_util.hpp"

using namespace hatewatch;
using hatewatch::testing::finite_difference;
using hatewatch::testing::max_abs_diff;
using hatewatch::testing::random_matrix;
using hatewatch::testing::relative_error;

TEST_CASE("parallel gemm variants match the serial reference") {
    std::mt19937_64 rng(7);
    for (auto [m, k, n] : {std::tuple{1, 1, 1}, {5, 3, 7}, {33, 17, 9}, {64, 64, 65}}) {
        Matrix a = random_matrix(m, k, rng), b = random_matrix(k, n, rng), bt = random_matrix(n, k, rng);
        Matrix c1, c2;
        kernels::gemm(a, b, c1);
        kernels::reference::gemm(a, b, c2);
        CHECK(max_abs_diff(c1, c2) < 1e-12);

        kernels::gemm_a_bt(a, bt, c1);
        kernels::reference::gemm_a_bt(a, bt, c2);
        CHECK(max_abs_diff(c1, c2) < 1e-12);

        Matrix at = random_matrix(k, m, rng);
        Matrix acc1(m, n, 0.5), acc2(m, n, 0.5);
        kernels::gemm_at_b_acc(at, b, acc1);
        kernels::reference::gemm_at_b_acc(at, b, acc2);
        CHECK(max_abs_diff(acc1, acc2) < 1e-12);
    }
}

TEST_CASE("gemm rejects mismatched inner dimensions") {
    Matrix a(2, 3), b(4, 2), c;
    CHECK_THROWS_AS(kernels::gemm(a, b, c), std::invalid_argument);
}

TEST_CASE("softmax and layernorm match the serial reference") {
    std::mt19937_64 rng(11);
    Matrix x = random_matrix(13, 10, rng, -4, 4);
    Matrix s1 = x, s2 = x;
    kernels::softmax_rows(s1);
    kernels::reference::softmax_rows(s2);
    CHECK(max_abs_diff(s1, s2) < 1e-14);

    Matrix gamma = random_matrix(1, 10, rng), beta = random_matrix(1, 10, rng);
    Matrix y1, y2, h1, h2;
    std::vector<double> r1, r2;
    kernels::layernorm_forward(x, gamma.storage(), beta.storage(), 1e-5, y1, h1, r1);
    kernels::reference::layernorm_forward(x, gamma.storage(), beta.storage(), 1e-5, y2, h2, r2);
    CHECK(max_abs_diff(y1, y2) < 1e-12);

    Matrix dy = random_matrix(13, 10, rng);
    Matrix dx1(13, 10), dx2(13, 10);
    std::vector<double> g1(10), b1(10), g2(10), b2(10);
    kernels::layernorm_backward(dy, h1, r1, gamma.storage(), dx1, g1, b1);
    kernels::reference::layernorm_backward(dy, h2, r2, gamma.storage(), dx2, g2, b2);
    CHECK(max_abs_diff(dx1, dx2) < 1e-12);
    CHECK(max_abs_diff(Matrix::row_vector(g1), Matrix::row_vector(g2)) < 1e-12);
}

TEST_CASE("attention kernels match the serial reference with masks and causality") {
    std::mt19937_64 rng(3);
    for (bool causal : {false, true}) {
        kernels::AttentionShape s{3, 5, 2, 4, causal};
        const int rows = s.batch * s.seq, cols = s.heads * s.head_dim;
        Matrix q = random_matrix(rows, cols, rng), k = random_matrix(rows, cols, rng), v = random_matrix(rows, cols, rng);
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(rows), 1);
        mask[4] = 0;   // last key of sequence 0
        mask[13] = 0;  // two padded keys in sequence 2
        mask[14] = 0;
        Matrix o1, o2;
        std::vector<double> p1, p2;
        kernels::attention_forward(s, q, k, v, mask, o1, p1);
        kernels::reference::attention_forward(s, q, k, v, mask, o2, p2);
        CHECK(max_abs_diff(o1, o2) < 1e-12);

        Matrix dout = random_matrix(rows, cols, rng);
        Matrix dq1(rows, cols), dk1(rows, cols), dv1(rows, cols), dq2(rows, cols), dk2(rows, cols), dv2(rows, cols);
        kernels::attention_backward(s, q, k, v, p1, dout, dq1, dk1, dv1);
        kernels::reference::attention_backward(s, q, k, v, p2, dout, dq2, dk2, dv2);
        CHECK(max_abs_diff(dq1, dq2) < 1e-12);
        CHECK(max_abs_diff(dk1, dk2) < 1e-12);
        CHECK(max_abs_diff(dv1, dv2) < 1e-12);
    }
}

namespace {

// Gradient of sum(w .* op(x)) computed by the tape vs. finite differences.
double tape_vs_fd(const std::function<Var(Tape&, Var)>& op, const Matrix& x0, std::mt19937_64& rng) {
    Tape probe;
    const Matrix& y0 = probe.value(op(probe, probe.constant(x0)));
    Matrix w = random_matrix(y0.rows(), y0.cols(), rng);
    auto f = [&](const Matrix& x) {
        Tape t;
        const Matrix& y = t.value(op(t, t.constant(x)));
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
        return s;
    };
    Tape t;
    Var x = t.input(x0);
    Var y = op(t, x);
    Var wv = t.constant(w);
    Var prod = ad::mul(t, y, wv);
    // sum via matmul with ones
    Var ones_r = t.constant(Matrix(1, t.value(prod).rows(), 1.0));
    Var ones_c = t.constant(Matrix(t.value(prod).cols(), 1, 1.0));
    Var total = ad::matmul(t, ad::matmul(t, ones_r, prod), ones_c);
    t.backward(total);
    return relative_error(t.grad(x), finite_difference(f, x0, 1e-5));
}

}  // namespace

TEST_CASE("tape gradients of every op match finite differences") {
    std::mt19937_64 rng(5);
    Matrix x = random_matrix(6, 8, rng);
    Matrix w = random_matrix(8, 3, rng);
    Matrix row = random_matrix(1, 8, rng);
    Matrix left = random_matrix(2, 6, rng);
    Matrix gamma = random_matrix(1, 8, rng);
    std::vector<int> ids = {2, 0, 5, 2};
    std::vector<std::uint8_t> mask = {1, 1, 0, 1, 0, 0};

    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::matmul(t, a, t.constant(w)); }, x, rng) < 1e-6);
    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::matmul(t, t.constant(left), a); }, x, rng) < 1e-6);
    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::matmul_bt(t, a, a); }, x, rng) < 1e-6);
    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::add_row(t, a, t.constant(row)); }, x, rng) < 1e-6);
    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::add_row(t, t.constant(x), ad::gather_rows(t, a, std::vector<int>{1})); }, x, rng) < 1e-6);
    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::mul(t, a, a); }, x, rng) < 1e-6);
    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::exp(t, ad::scale(t, a, 0.5)); }, x, rng) < 1e-6);
    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::gelu(t, a); }, x, rng) < 1e-6);
    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::softmax_rows(t, a); }, x, rng) < 1e-6);
    CHECK(tape_vs_fd([&](Tape& t, Var a) {
              return ad::layernorm(t, a, t.constant(gamma), t.constant(row));
          }, x, rng) < 1e-5);
    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::embedding(t, a, ids); }, x, rng) < 1e-6);
    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::masked_mean_rows(t, a, 3, mask); }, x, rng) < 1e-6);
    CHECK(tape_vs_fd([&](Tape& t, Var a) { return ad::concat_cols(t, a, ad::scale(t, a, 2.0)); }, x, rng) < 1e-6);

    kernels::AttentionShape s{2, 3, 2, 4, true};
    std::vector<std::uint8_t> amask = {1, 1, 1, 1, 1, 0};
    CHECK(tape_vs_fd([&](Tape& t, Var a) {
              return ad::attention(t, a, ad::scale(t, a, 0.7), ad::gelu(t, a), s, amask);
          }, x, rng) < 1e-5);
}

TEST_CASE("parameter gradients accumulate into the store") {
    ParameterStore store;
    const int w = store.add("w", Matrix(2, 2, 1.0));
    Tape t(&store);
    Var x = t.constant(Matrix(1, 2, std::vector<double>{1.0, 2.0}));
    Var y = ad::matmul(t, x, t.param(w));
    Var s = ad::weighted_sum(t, std::vector<Var>{ad::matmul(t, y, t.constant(Matrix(2, 1, 1.0)))}, std::vector<double>{3.0});
    t.backward(s);
    // d/dW (3 * sum(x W)) = 3 * x^T 1
    CHECK(store.at(w).grad(0, 0) == doctest::Approx(3.0));
    CHECK(store.at(w).grad(1, 1) == doctest::Approx(6.0));
    store.zero_grad();
    CHECK(store.at(w).grad(1, 1) == 0.0);
}

TEST_CASE("dropout is identity at p = 0 and rescales kept entries") {
    std::mt19937_64 rng(1);
    Tape t;
    Var x = t.constant(Matrix(4, 50, 1.0));
    CHECK(ad::dropout(t, x, 0.0, rng).id == x.id);
    const Matrix& y = t.value(ad::dropout(t, x, 0.2, rng));
    for (std::size_t i = 0; i < y.size(); ++i) CHECK((y[i] == 0.0 || std::abs(y[i] - 1.25) < 1e-12));
}
