// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>

#include "hatewatch/tensor.hpp"

// Dense numeric kernels used by the autodiff tape.
//
// Every kernel in `hatewatch::kernels` is OpenMP-parallel over an output
// dimension (rows, columns, or (batch, head) pairs) and never reduces across
// threads, so results are bitwise identical for any thread count. The serial
// versions in `hatewatch::kernels::reference` are kept for testing and
// benchmarking; they follow the textbook loop order.
namespace hatewatch::kernels {

/// c (m x n) = a (m x k) * b (k x n), or c += ... when `accumulate`.
void gemm(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
/// c (m x n) += a^T * b, with a (k x m) and b (k x n).
void gemm_at_b_acc(const Matrix& a, const Matrix& b, Matrix& c);
/// c (m x n) = a (m x k) * b^T with b (n x k), or c += ... when `accumulate`.
void gemm_a_bt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);

/// Row-wise softmax in place.
void softmax_rows(Matrix& x);

/// Row-wise layer normalization. Saves normalized rows and reciprocal std
/// for the backward pass.
void layernorm_forward(const Matrix& x, std::span<const double> gamma, std::span<const double> beta,
                       double eps, Matrix& y, Matrix& xhat, std::vector<double>& rstd);
void layernorm_backward(const Matrix& dy, const Matrix& xhat, std::span<const double> rstd,
                        std::span<const double> gamma, Matrix& dx, std::span<double> dgamma,
                        std::span<double> dbeta);

/// Tanh-approximated GELU.
void gelu_forward(const Matrix& x, Matrix& y);
void gelu_backward(const Matrix& x, const Matrix& dy, Matrix& dx);

/// Shape of a packed multi-head attention problem. Activations are
/// (batch * seq) x (heads * head_dim) row-major.
struct AttentionShape {
    int batch = 0;
    int seq = 0;
    int heads = 0;
    int head_dim = 0;
    bool causal = false;
};

/// Scaled dot-product attention. `key_mask` has batch * seq entries, nonzero
/// for valid keys. `probs` receives batch * heads * seq * seq weights.
void attention_forward(const AttentionShape& s, const Matrix& q, const Matrix& k, const Matrix& v,
                       std::span<const std::uint8_t> key_mask, Matrix& out, std::vector<double>& probs);
void attention_backward(const AttentionShape& s, const Matrix& q, const Matrix& k, const Matrix& v,
                        std::span<const double> probs, const Matrix& dout, Matrix& dq, Matrix& dk,
                        Matrix& dv);

namespace reference {

void gemm(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void gemm_at_b_acc(const Matrix& a, const Matrix& b, Matrix& c);
void gemm_a_bt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void softmax_rows(Matrix& x);
void layernorm_forward(const Matrix& x, std::span<const double> gamma, std::span<const double> beta,
                       double eps, Matrix& y, Matrix& xhat, std::vector<double>& rstd);
void layernorm_backward(const Matrix& dy, const Matrix& xhat, std::span<const double> rstd,
                        std::span<const double> gamma, Matrix& dx, std::span<double> dgamma,
                        std::span<double> dbeta);
void attention_forward(const AttentionShape& s, const Matrix& q, const Matrix& k, const Matrix& v,
                       std::span<const std::uint8_t> key_mask, Matrix& out, std::vector<double>& probs);
void attention_backward(const AttentionShape& s, const Matrix& q, const Matrix& k, const Matrix& v,
                        std::span<const double> probs, const Matrix& dout, Matrix& dq, Matrix& dk,
                        Matrix& dv);

}  // namespace reference

}  // namespace hatewatch::kernels
