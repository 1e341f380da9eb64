// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/metrics.hpp"

#include "hatewatch/errors.hpp"

namespace hatewatch {

BinaryMetrics compute_metrics(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw ConfigError("prediction and label counts differ");
    if (truth.empty()) throw DataError("cannot score an empty corpus");
    BinaryMetrics m;
    m.n = static_cast<std::int64_t>(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if ((truth[i] != 0 && truth[i] != 1) || (predicted[i] != 0 && predicted[i] != 1))
            throw DataError("labels must be 0 or 1");
        ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    }
    for (int c = 0; c < 2; ++c) {
        const auto tp = static_cast<double>(m.confusion[c][c]);
        const auto fp = static_cast<double>(m.confusion[1 - c][c]);
        const auto fn = static_cast<double>(m.confusion[c][1 - c]);
        const double denom = 2.0 * tp + fp + fn;
        m.f1[static_cast<std::size_t>(c)] = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    }
    m.macro_f1 = 0.5 * (m.f1[0] + m.f1[1]);
    m.accuracy = static_cast<double>(m.confusion[0][0] + m.confusion[1][1]) / static_cast<double>(m.n);
    return m;
}

EarlyStopper::EarlyStopper(int patience) : patience_(patience) {
    if (patience < 1) throw ConfigError("patience must be positive");
}

bool EarlyStopper::update(double metric) {
    const int index = count_++;
    if (best_index_ < 0 || metric > best_) {
        best_ = metric;
        best_index_ = index;
        since_best_ = 0;
        return true;
    }
    ++since_best_;
    return false;
}

}  // namespace hatewatch
