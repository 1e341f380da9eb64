// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hatewatch/eval.hpp"
#include "hatewatch/tensor.hpp"

namespace hatewatch::plot {

constexpr int kMinProjectionPoints = 5;

struct ProjectionOptions {
    /// Clamped to (n - 1) / 3 for small inputs.
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    std::uint64_t seed = 0;
};

/// Exact t-SNE to two dimensions. Deterministic for a given input and seed.
/// Throws DataError with fewer than kMinProjectionPoints rows.
Matrix tsne(const Matrix& x, const ProjectionOptions& options = {});

/// Binary-searched conditional affinities P(j|i) with the given perplexity;
/// exposed for testing.
Matrix conditional_affinities(const Matrix& sq_dist, double perplexity);

struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
    std::string group;  // colour
    bool filled = true;
};

std::string scatter_svg(const std::vector<ScatterPoint>& points, const std::string& title);

/// Table image of a grid report; failed cells are shown as "failed".
std::string grid_svg(const EvalReport& report, const std::string& title);

}  // namespace hatewatch::plot
