// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace hatewatch {

AdamW::AdamW(const ParameterStore& params, AdamWOptions options) : opt_(options) {
    for (const auto& p : params.all()) {
        m_.emplace_back(p.value.rows(), p.value.cols());
        v_.emplace_back(p.value.rows(), p.value.cols());
        decay_.push_back(p.name.size() > 2 && p.name.compare(p.name.size() - 2, 2, ".w") == 0);
    }
}

void AdamW::step(ParameterStore& params) {
    if (static_cast<std::size_t>(params.size()) != m_.size()) throw std::logic_error("AdamW: parameter layout changed");
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (int i = 0; i < params.size(); ++i) {
        Parameter& p = params.at(i);
        Matrix& m = m_[static_cast<std::size_t>(i)];
        Matrix& v = v_[static_cast<std::size_t>(i)];
        const double decay = decay_[static_cast<std::size_t>(i)] ? opt_.lr * opt_.weight_decay : 0.0;
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad[k];
            m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * g;
            v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * g * g;
            p.value[k] -= decay * p.value[k];
            p.value[k] -= opt_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + opt_.eps);
        }
    }
}

}  // namespace hatewatch
