// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace hatewatch {

/// Binary classification scores. Class 0 is non-hate, class 1 hate.
struct BinaryMetrics {
    std::int64_t n = 0;
    /// confusion[true][predicted]
    std::array<std::array<std::int64_t, 2>, 2> confusion{};
    std::array<double, 2> f1{};
    double macro_f1 = 0.0;
    double accuracy = 0.0;
};

/// Per-class F1 is 0 when the class is neither predicted nor present.
BinaryMetrics compute_metrics(std::span<const int> predicted, std::span<const int> truth);

/// Tracks the best validation score; stops after `patience` evaluations
/// without strict improvement.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience);

    /// Records one evaluation; true when it is a new best.
    bool update(double metric);
    bool should_stop() const { return since_best_ >= patience_; }
    double best() const { return best_; }
    int best_index() const { return best_index_; }
    int evaluations() const { return count_; }

private:
    int patience_;
    double best_ = -1.0;
    int best_index_ = -1;
    int since_best_ = 0;
    int count_ = 0;
};

}  // namespace hatewatch
