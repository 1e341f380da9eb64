// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

// Serial reference kernels against their OpenMP versions on training-sized
// shapes. Usage: bench_kernels [--quick]

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>

#include "hatewatch/kernels.hpp"

using namespace hatewatch;
namespace k = hatewatch::kernels;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(rng);
    return m;
}

double max_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

double time_ms(const std::function<void()>& f, int reps) {
    f();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) f();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
}

void report(const char* name, const std::string& shape, double serial, double parallel, double diff) {
    std::printf("%-20s %-22s %10.3f %10.3f %8.2fx %10.2e\n", name, shape.c_str(), serial, parallel, serial / parallel, diff);
}

}  // namespace

int main(int argc, char** argv) {
    const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
    const int reps = quick ? 1 : 20;
    std::mt19937_64 rng(0);
    std::printf("threads: %d\n", omp_get_max_threads());
    std::printf("%-20s %-22s %10s %10s %9s %10s\n", "kernel", "shape", "serial ms", "omp ms", "speedup", "max |diff|");

    // Batch 32 x 32 tokens against a 64 -> 128 projection.
    const int rows = 32 * 32;
    {
        const Matrix a = random_matrix(rows, 64, rng), b = random_matrix(64, 128, rng);
        Matrix c1(rows, 128), c2(rows, 128);
        const double s = time_ms([&] { k::reference::gemm(a, b, c1); }, reps);
        const double p = time_ms([&] { k::gemm(a, b, c2); }, reps);
        report("gemm", "1024x64 * 64x128", s, p, max_diff(c1, c2));
    }
    {
        const Matrix a = random_matrix(rows, 64, rng), b = random_matrix(rows, 128, rng);
        Matrix c1(64, 128), c2(64, 128);
        const double s = time_ms([&] { c1.fill(0.0); k::reference::gemm_at_b_acc(a, b, c1); }, reps);
        const double p = time_ms([&] { c2.fill(0.0); k::gemm_at_b_acc(a, b, c2); }, reps);
        report("gemm_at_b_acc", "(1024x64)^T * 1024x128", s, p, max_diff(c1, c2));
    }
    {
        const Matrix a = random_matrix(rows, 128, rng), b = random_matrix(64, 128, rng);
        Matrix c1(rows, 64), c2(rows, 64);
        const double s = time_ms([&] { k::reference::gemm_a_bt(a, b, c1); }, reps);
        const double p = time_ms([&] { k::gemm_a_bt(a, b, c2); }, reps);
        report("gemm_a_bt", "1024x128 * (64x128)^T", s, p, max_diff(c1, c2));
    }
    {
        const Matrix x = random_matrix(rows, 512, rng);
        Matrix y1 = x, y2 = x;
        const double s = time_ms([&] { y1 = x; k::reference::softmax_rows(y1); }, reps);
        const double p = time_ms([&] { y2 = x; k::softmax_rows(y2); }, reps);
        report("softmax_rows", "1024x512", s, p, max_diff(y1, y2));
    }
    {
        const Matrix x = random_matrix(rows, 64, rng), dy = random_matrix(rows, 64, rng);
        std::vector<double> gamma(64, 1.1), beta(64, 0.1), r1, r2, dg1(64), dg2(64), db1(64), db2(64);
        Matrix y1(rows, 64), y2(rows, 64), h1(rows, 64), h2(rows, 64), dx1(rows, 64), dx2(rows, 64);
        const double s = time_ms(
            [&] {
                k::reference::layernorm_forward(x, gamma, beta, 1e-5, y1, h1, r1);
                std::fill(dg1.begin(), dg1.end(), 0.0);
                std::fill(db1.begin(), db1.end(), 0.0);
                k::reference::layernorm_backward(dy, h1, r1, gamma, dx1, dg1, db1);
            },
            reps);
        const double p = time_ms(
            [&] {
                k::layernorm_forward(x, gamma, beta, 1e-5, y2, h2, r2);
                std::fill(dg2.begin(), dg2.end(), 0.0);
                std::fill(db2.begin(), db2.end(), 0.0);
                k::layernorm_backward(dy, h2, r2, gamma, dx2, dg2, db2);
            },
            reps);
        report("layernorm fwd+bwd", "1024x64", s, p, std::max(max_diff(y1, y2), max_diff(dx1, dx2)));
    }
    {
        const k::AttentionShape shape{32, 32, 4, 16, false};
        const Matrix q = random_matrix(rows, 64, rng), kk = random_matrix(rows, 64, rng), v = random_matrix(rows, 64, rng);
        const Matrix dout = random_matrix(rows, 64, rng);
        std::vector<std::uint8_t> mask(rows, 1);
        std::vector<double> p1, p2;
        Matrix o1(rows, 64), o2(rows, 64), dq1(rows, 64), dq2(rows, 64), dk1(rows, 64), dk2(rows, 64), dv1(rows, 64),
            dv2(rows, 64);
        const double s = time_ms(
            [&] {
                k::reference::attention_forward(shape, q, kk, v, mask, o1, p1);
                k::reference::attention_backward(shape, q, kk, v, p1, dout, dq1, dk1, dv1);
            },
            reps);
        const double p = time_ms(
            [&] {
                k::attention_forward(shape, q, kk, v, mask, o2, p2);
                k::attention_backward(shape, q, kk, v, p2, dout, dq2, dk2, dv2);
            },
            reps);
        report("attention fwd+bwd", "32x32 tokens, 4 heads", s, p,
               std::max({max_diff(o1, o2), max_diff(dq1, dq2), max_diff(dk1, dk2), max_diff(dv1, dv2)}));
    }
    return 0;
}
