// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "hatewatch/tensor.hpp"

namespace hatewatch::testing {

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(rng);
    return m;
}

/// Random probability rows bounded away from zero.
inline Matrix random_probs(int rows, int cols, std::mt19937_64& rng) {
    Matrix m = random_matrix(rows, cols, rng, 0.05, 1.0);
    for (int r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < cols; ++c) s += m(r, c);
        for (int c = 0; c < cols; ++c) m(r, c) /= s;
    }
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

/// Central finite differences of f with respect to every entry of x.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, Matrix x, double h = 1e-4) {
    Matrix g(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

/// max |a - b| / max(|b|_inf, floor): relative error of a gradient as a whole.
inline double relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-6) {
    double scale = floor;
    for (std::size_t i = 0; i < numeric.size(); ++i) scale = std::max(scale, std::abs(numeric[i]));
    return max_abs_diff(analytic, numeric) / scale;
}

}  // namespace hatewatch::testing
