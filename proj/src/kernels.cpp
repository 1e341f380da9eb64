// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/kernels.hpp"

#include <cmath>
#include <limits>

namespace hatewatch::kernels {

namespace {

void check_gemm(const Matrix& a, const Matrix& b, int a_inner, int b_inner, const char* what) {
    if (a_inner != b_inner)
        throw std::invalid_argument(std::string(what) + ": inner dimension mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
}

void ensure_shape(Matrix& c, int rows, int cols, bool accumulate) {
    if (accumulate) {
        if (c.rows() != rows || c.cols() != cols)
            throw std::invalid_argument("gemm: accumulator has shape " + c.shape_str());
        return;
    }
    if (c.rows() != rows || c.cols() != cols) c = Matrix(rows, cols);
    else c.fill(0.0);
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

}  // namespace

void gemm(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    check_gemm(a, b, a.cols(), b.rows(), "gemm");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    ensure_shape(c, m, n, accumulate);
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* crow = pc + static_cast<std::size_t>(i) * n;
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = pb + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_at_b_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    check_gemm(a, b, a.rows(), b.rows(), "gemm_at_b");
    const int k = a.rows(), m = a.cols(), n = b.cols();
    if (c.rows() != m || c.cols() != n) throw std::invalid_argument("gemm_at_b: accumulator has shape " + c.shape_str());
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* crow = pc + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = pa[static_cast<std::size_t>(p) * m + i];
            if (av == 0.0) continue;
            const double* brow = pb + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_a_bt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    check_gemm(a, b, a.cols(), b.cols(), "gemm_a_bt");
    const int m = a.rows(), k = a.cols(), n = b.rows();
    ensure_shape(c, m, n, accumulate);
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        double* crow = pc + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = pb + static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

void softmax_rows(Matrix& x) {
    const int rows = x.rows();
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        auto row = x.row(r);
        double mx = -std::numeric_limits<double>::infinity();
        for (double v : row) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
}

void layernorm_forward(const Matrix& x, std::span<const double> gamma, std::span<const double> beta, double eps,
                       Matrix& y, Matrix& xhat, std::vector<double>& rstd) {
    const int rows = x.rows(), n = x.cols();
    y = Matrix(rows, n);
    xhat = Matrix(rows, n);
    rstd.assign(static_cast<std::size_t>(rows), 0.0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        auto xr = x.row(r);
        double mean = 0.0;
        for (double v : xr) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : xr) var += (v - mean) * (v - mean);
        var /= n;
        const double rs = 1.0 / std::sqrt(var + eps);
        rstd[static_cast<std::size_t>(r)] = rs;
        auto hr = xhat.row(r);
        auto yr = y.row(r);
        for (int j = 0; j < n; ++j) {
            hr[j] = (xr[j] - mean) * rs;
            yr[j] = gamma[j] * hr[j] + beta[j];
        }
    }
}

void layernorm_backward(const Matrix& dy, const Matrix& xhat, std::span<const double> rstd,
                        std::span<const double> gamma, Matrix& dx, std::span<double> dgamma, std::span<double> dbeta) {
    const int rows = dy.rows(), n = dy.cols();
    if (!dx.same_shape(dy)) dx = Matrix(rows, n);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        auto dyr = dy.row(r);
        auto hr = xhat.row(r);
        double sum_d = 0.0, sum_dh = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = dyr[j] * gamma[j];
            sum_d += d;
            sum_dh += d * hr[j];
        }
        auto dxr = dx.row(r);
        const double scale = rstd[static_cast<std::size_t>(r)] / n;
        for (int j = 0; j < n; ++j) {
            const double d = dyr[j] * gamma[j];
            dxr[j] += scale * (n * d - sum_d - hr[j] * sum_dh);
        }
    }
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j) {
        double g = 0.0, b = 0.0;
        for (int r = 0; r < rows; ++r) {
            g += dy(r, j) * xhat(r, j);
            b += dy(r, j);
        }
        dgamma[j] += g;
        dbeta[j] += b;
    }
}

void gelu_forward(const Matrix& x, Matrix& y) {
    if (!y.same_shape(x)) y = Matrix(x.rows(), x.cols());
    const std::size_t n = x.size();
    const double* px = x.data();
    double* py = y.data();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        const double v = px[i];
        py[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + 0.044715 * v * v * v)));
    }
}

void gelu_backward(const Matrix& x, const Matrix& dy, Matrix& dx) {
    if (!dx.same_shape(x)) dx = Matrix(x.rows(), x.cols());
    const std::size_t n = x.size();
    const double* px = x.data();
    const double* pd = dy.data();
    double* po = dx.data();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        const double v = px[i];
        const double u = kGeluC * (v + 0.044715 * v * v * v);
        const double t = std::tanh(u);
        const double du = kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
        po[i] += pd[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
    }
}

namespace {

// One (batch, head) slice of attention; slices write disjoint columns.
void attention_slice_forward(const AttentionShape& s, int b, int h, const Matrix& q, const Matrix& k,
                             const Matrix& v, std::span<const std::uint8_t> key_mask, Matrix& out,
                             std::vector<double>& probs) {
    const int L = s.seq, dh = s.head_dim, off = h * dh;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    double* P = probs.data() + (static_cast<std::size_t>(b) * s.heads + h) * L * L;
    for (int i = 0; i < L; ++i) {
        const double* qi = q.data() + static_cast<std::size_t>(b * L + i) * q.cols() + off;
        double* pi = P + static_cast<std::size_t>(i) * L;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < L; ++j) {
            const bool ok = key_mask[static_cast<std::size_t>(b * L + j)] != 0 && (!s.causal || j <= i);
            if (!ok) {
                pi[j] = -std::numeric_limits<double>::infinity();
                continue;
            }
            const double* kj = k.data() + static_cast<std::size_t>(b * L + j) * k.cols() + off;
            double acc = 0.0;
            for (int d = 0; d < dh; ++d) acc += qi[d] * kj[d];
            pi[j] = acc * scale;
            mx = std::max(mx, pi[j]);
        }
        double* oi = out.data() + static_cast<std::size_t>(b * L + i) * out.cols() + off;
        for (int d = 0; d < dh; ++d) oi[d] = 0.0;
        if (mx == -std::numeric_limits<double>::infinity()) {
            for (int j = 0; j < L; ++j) pi[j] = 0.0;
            continue;
        }
        double sum = 0.0;
        for (int j = 0; j < L; ++j) {
            pi[j] = std::isinf(pi[j]) ? 0.0 : std::exp(pi[j] - mx);
            sum += pi[j];
        }
        for (int j = 0; j < L; ++j) {
            pi[j] /= sum;
            if (pi[j] == 0.0) continue;
            const double* vj = v.data() + static_cast<std::size_t>(b * L + j) * v.cols() + off;
            for (int d = 0; d < dh; ++d) oi[d] += pi[j] * vj[d];
        }
    }
}

void attention_slice_backward(const AttentionShape& s, int b, int h, const Matrix& q, const Matrix& k,
                              const Matrix& v, std::span<const double> probs, const Matrix& dout, Matrix& dq,
                              Matrix& dk, Matrix& dv) {
    const int L = s.seq, dh = s.head_dim, off = h * dh;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const double* P = probs.data() + (static_cast<std::size_t>(b) * s.heads + h) * L * L;
    std::vector<double> dp(static_cast<std::size_t>(L));
    const int D = q.cols();
    for (int i = 0; i < L; ++i) {
        const double* pi = P + static_cast<std::size_t>(i) * L;
        const double* doi = dout.data() + static_cast<std::size_t>(b * L + i) * D + off;
        double dot = 0.0;
        for (int j = 0; j < L; ++j) {
            if (pi[j] == 0.0) {
                dp[j] = 0.0;
                continue;
            }
            const double* vj = v.data() + static_cast<std::size_t>(b * L + j) * D + off;
            double* dvj = dv.data() + static_cast<std::size_t>(b * L + j) * D + off;
            double acc = 0.0;
            for (int d = 0; d < dh; ++d) {
                acc += doi[d] * vj[d];
                dvj[d] += pi[j] * doi[d];
            }
            dp[j] = acc;
            dot += pi[j] * acc;
        }
        const double* qi = q.data() + static_cast<std::size_t>(b * L + i) * D + off;
        double* dqi = dq.data() + static_cast<std::size_t>(b * L + i) * D + off;
        for (int j = 0; j < L; ++j) {
            if (pi[j] == 0.0) continue;
            const double ds = pi[j] * (dp[j] - dot) * scale;
            const double* kj = k.data() + static_cast<std::size_t>(b * L + j) * D + off;
            double* dkj = dk.data() + static_cast<std::size_t>(b * L + j) * D + off;
            for (int d = 0; d < dh; ++d) {
                dqi[d] += ds * kj[d];
                dkj[d] += ds * qi[d];
            }
        }
    }
}

void check_attention(const AttentionShape& s, const Matrix& q, const Matrix& k, const Matrix& v) {
    const int rows = s.batch * s.seq, cols = s.heads * s.head_dim;
    for (const Matrix* m : {&q, &k, &v})
        if (m->rows() != rows || m->cols() != cols)
            throw std::invalid_argument("attention: operand shape " + m->shape_str() + " does not match layout");
}

}  // namespace

void attention_forward(const AttentionShape& s, const Matrix& q, const Matrix& k, const Matrix& v,
                       std::span<const std::uint8_t> key_mask, Matrix& out, std::vector<double>& probs) {
    check_attention(s, q, k, v);
    out = Matrix(q.rows(), q.cols());
    probs.assign(static_cast<std::size_t>(s.batch) * s.heads * s.seq * s.seq, 0.0);
    const int slices = s.batch * s.heads;
#pragma omp parallel for schedule(static)
    for (int idx = 0; idx < slices; ++idx)
        attention_slice_forward(s, idx / s.heads, idx % s.heads, q, k, v, key_mask, out, probs);
}

void attention_backward(const AttentionShape& s, const Matrix& q, const Matrix& k, const Matrix& v,
                        std::span<const double> probs, const Matrix& dout, Matrix& dq, Matrix& dk, Matrix& dv) {
    check_attention(s, q, k, v);
    const int slices = s.batch * s.heads;
#pragma omp parallel for schedule(static)
    for (int idx = 0; idx < slices; ++idx)
        attention_slice_backward(s, idx / s.heads, idx % s.heads, q, k, v, probs, dout, dq, dk, dv);
}

namespace reference {

void gemm(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    check_gemm(a, b, a.cols(), b.rows(), "gemm");
    ensure_shape(c, a.rows(), b.cols(), accumulate);
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (int p = 0; p < a.cols(); ++p) acc += a(i, p) * b(p, j);
            c(i, j) += acc;
        }
}

void gemm_at_b_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    check_gemm(a, b, a.rows(), b.rows(), "gemm_at_b");
    for (int i = 0; i < a.cols(); ++i)
        for (int j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (int p = 0; p < a.rows(); ++p) acc += a(p, i) * b(p, j);
            c(i, j) += acc;
        }
}

void gemm_a_bt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    check_gemm(a, b, a.cols(), b.cols(), "gemm_a_bt");
    ensure_shape(c, a.rows(), b.rows(), accumulate);
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < b.rows(); ++j) {
            double acc = 0.0;
            for (int p = 0; p < a.cols(); ++p) acc += a(i, p) * b(j, p);
            c(i, j) += acc;
        }
}

void softmax_rows(Matrix& x) {
    for (int r = 0; r < x.rows(); ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < x.cols(); ++j) mx = std::max(mx, x(r, j));
        double sum = 0.0;
        for (int j = 0; j < x.cols(); ++j) sum += std::exp(x(r, j) - mx);
        for (int j = 0; j < x.cols(); ++j) x(r, j) = std::exp(x(r, j) - mx) / sum;
    }
}

void layernorm_forward(const Matrix& x, std::span<const double> gamma, std::span<const double> beta, double eps,
                       Matrix& y, Matrix& xhat, std::vector<double>& rstd) {
    y = Matrix(x.rows(), x.cols());
    xhat = Matrix(x.rows(), x.cols());
    rstd.assign(static_cast<std::size_t>(x.rows()), 0.0);
    const int n = x.cols();
    for (int r = 0; r < x.rows(); ++r) {
        double mean = 0.0, var = 0.0;
        for (int j = 0; j < n; ++j) mean += x(r, j) / n;
        for (int j = 0; j < n; ++j) var += (x(r, j) - mean) * (x(r, j) - mean) / n;
        rstd[static_cast<std::size_t>(r)] = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < n; ++j) {
            xhat(r, j) = (x(r, j) - mean) * rstd[static_cast<std::size_t>(r)];
            y(r, j) = gamma[j] * xhat(r, j) + beta[j];
        }
    }
}

void layernorm_backward(const Matrix& dy, const Matrix& xhat, std::span<const double> rstd,
                        std::span<const double> gamma, Matrix& dx, std::span<double> dgamma, std::span<double> dbeta) {
    const int n = dy.cols();
    if (!dx.same_shape(dy)) dx = Matrix(dy.rows(), n);
    for (int r = 0; r < dy.rows(); ++r) {
        double sum_d = 0.0, sum_dh = 0.0;
        for (int j = 0; j < n; ++j) {
            sum_d += dy(r, j) * gamma[j];
            sum_dh += dy(r, j) * gamma[j] * xhat(r, j);
            dgamma[j] += dy(r, j) * xhat(r, j);
            dbeta[j] += dy(r, j);
        }
        for (int j = 0; j < n; ++j)
            dx(r, j) += rstd[static_cast<std::size_t>(r)] / n *
                        (n * dy(r, j) * gamma[j] - sum_d - xhat(r, j) * sum_dh);
    }
}

void attention_forward(const AttentionShape& s, const Matrix& q, const Matrix& k, const Matrix& v,
                       std::span<const std::uint8_t> key_mask, Matrix& out, std::vector<double>& probs) {
    check_attention(s, q, k, v);
    const int L = s.seq, dh = s.head_dim;
    out = Matrix(q.rows(), q.cols());
    probs.assign(static_cast<std::size_t>(s.batch) * s.heads * L * L, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    auto P = [&](int b, int h, int i, int j) -> double& {
        return probs[((static_cast<std::size_t>(b) * s.heads + h) * L + i) * L + j];
    };
    for (int b = 0; b < s.batch; ++b)
        for (int h = 0; h < s.heads; ++h)
            for (int i = 0; i < L; ++i) {
                Matrix scores(1, L);
                std::vector<bool> valid(static_cast<std::size_t>(L));
                bool any = false;
                for (int j = 0; j < L; ++j) {
                    valid[j] = key_mask[static_cast<std::size_t>(b * L + j)] != 0 && (!s.causal || j <= i);
                    any = any || valid[j];
                    double acc = 0.0;
                    for (int d = 0; d < dh; ++d) acc += q(b * L + i, h * dh + d) * k(b * L + j, h * dh + d);
                    scores(0, j) = valid[j] ? acc * scale : -1e300;
                }
                if (!any) continue;
                softmax_rows(scores);
                for (int j = 0; j < L; ++j) {
                    P(b, h, i, j) = valid[j] ? scores(0, j) : 0.0;
                    for (int d = 0; d < dh; ++d) out(b * L + i, h * dh + d) += P(b, h, i, j) * v(b * L + j, h * dh + d);
                }
            }
}

void attention_backward(const AttentionShape& s, const Matrix& q, const Matrix& k, const Matrix& v,
                        std::span<const double> probs, const Matrix& dout, Matrix& dq, Matrix& dk, Matrix& dv) {
    check_attention(s, q, k, v);
    const int L = s.seq, dh = s.head_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    auto P = [&](int b, int h, int i, int j) {
        return probs[((static_cast<std::size_t>(b) * s.heads + h) * L + i) * L + j];
    };
    for (int b = 0; b < s.batch; ++b)
        for (int h = 0; h < s.heads; ++h)
            for (int i = 0; i < L; ++i) {
                std::vector<double> dp(static_cast<std::size_t>(L), 0.0);
                for (int j = 0; j < L; ++j)
                    for (int d = 0; d < dh; ++d) {
                        dp[j] += dout(b * L + i, h * dh + d) * v(b * L + j, h * dh + d);
                        dv(b * L + j, h * dh + d) += P(b, h, i, j) * dout(b * L + i, h * dh + d);
                    }
                for (int j = 0; j < L; ++j) {
                    double ds = 0.0;
                    for (int m = 0; m < L; ++m) ds += P(b, h, i, j) * ((j == m ? 1.0 : 0.0) - P(b, h, i, m)) * dp[m];
                    ds *= scale;
                    for (int d = 0; d < dh; ++d) {
                        dq(b * L + i, h * dh + d) += ds * k(b * L + j, h * dh + d);
                        dk(b * L + j, h * dh + d) += ds * q(b * L + i, h * dh + d);
                    }
                }
            }
}

}  // namespace reference

}  // namespace hatewatch::kernels
