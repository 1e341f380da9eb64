// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <vector>

#include "hatewatch/autodiff.hpp"

namespace hatewatch {

struct AdamWOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// Adam with decoupled weight decay. Decay applies to weight matrices
/// (names ending in ".w") only.
class AdamW {
public:
    AdamW() = default;
    AdamW(const ParameterStore& params, AdamWOptions options);

    /// One update from the gradients currently held in `params`.
    void step(ParameterStore& params);

    std::int64_t steps() const { return t_; }
    const AdamWOptions& options() const { return opt_; }

    std::vector<Matrix>& first_moments() { return m_; }
    std::vector<Matrix>& second_moments() { return v_; }
    const std::vector<Matrix>& first_moments() const { return m_; }
    const std::vector<Matrix>& second_moments() const { return v_; }
    void set_steps(std::int64_t t) { t_ = t; }

private:
    AdamWOptions opt_;
    std::vector<Matrix> m_, v_;
    std::vector<bool> decay_;
    std::int64_t t_ = 0;
};

}  // namespace hatewatch
