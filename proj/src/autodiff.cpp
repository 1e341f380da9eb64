// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "hatewatch/autodiff.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace hatewatch {

int ParameterStore::add(const std::string& name, Matrix init) {
    if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
    Parameter p;
    p.name = name;
    p.grad = Matrix(init.rows(), init.cols());
    p.value = std::move(init);
    params_.push_back(std::move(p));
    const int id = static_cast<int>(params_.size()) - 1;
    index_[name] = id;
    return id;
}

int ParameterStore::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter " + name);
    return it->second;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParameterStore::assign_values(const ParameterStore& other) {
    if (other.size() != size()) throw std::invalid_argument("assign_values: layout mismatch");
    for (int i = 0; i < size(); ++i) {
        if (!other.at(i).value.same_shape(at(i).value) || other.at(i).name != at(i).name)
            throw std::invalid_argument("assign_values: parameter " + at(i).name + " differs");
        at(i).value = other.at(i).value;
    }
}

Var Tape::constant(Matrix value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Matrix value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape Tape::inference(const ParameterStore& params) {
    Tape t;
    t.params_ = &params;
    return t;
}

Var Tape::param(int param_id) {
    if (params_ == nullptr) throw std::logic_error("tape has no parameter store");
    params_->at(param_id);  // bounds check
    Node n;
    n.param = param_id;
    n.requires_grad = writable_ != nullptr;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(Var v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    return n.param >= 0 ? params_->at(n.param).value : n.value;
}

const Matrix& Tape::grad(Var v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    if (n.param >= 0) return params_->at(n.param).grad;
    return n.grad.empty() && n.value.size() != 0 ? empty_ : n.grad;
}

bool Tape::has_grad(Var v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    return n.param >= 0 || !n.grad.empty();
}

Matrix& Tape::grad_ref(Var v) {
    Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    if (n.param >= 0) {
        if (writable_ == nullptr) throw std::logic_error("grad_ref: read-only parameter store");
        return writable_->at(n.param).grad;
    }
    if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

Var Tape::push(Matrix value, std::vector<Var> inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    for (Var in : inputs) n.requires_grad = n.requires_grad || requires_grad(in);
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var root) {
    const Matrix& rv = value(root);
    if (rv.rows() != 1 || rv.cols() != 1) throw std::invalid_argument("backward: root must be a 1x1 scalar");
    if (!requires_grad(root)) return;
    grad_ref(root)(0, 0) += 1.0;
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.backward || n.grad.empty()) continue;
        n.backward(*this, Var{i});
    }
}

namespace ad {

namespace {

void require_same(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

void accumulate(Matrix& dst, const Matrix& src, double s = 1.0) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
    Matrix out;
    kernels::gemm(t.value(a), t.value(b), out);
    return t.push(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a)) kernels::gemm_a_bt(g, t.value(b), t.grad_ref(a), true);
        if (t.requires_grad(b)) kernels::gemm_at_b_acc(t.value(a), g, t.grad_ref(b));
    });
}

Var matmul_bt(Tape& t, Var a, Var b) {
    Matrix out;
    kernels::gemm_a_bt(t.value(a), t.value(b), out);
    return t.push(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a)) kernels::gemm(g, t.value(b), t.grad_ref(a), true);
        if (t.requires_grad(b)) kernels::gemm_at_b_acc(g, t.value(a), t.grad_ref(b));
    });
}

Var add(Tape& t, Var a, Var b) {
    require_same(t.value(a), t.value(b), "add");
    Matrix out = t.value(a);
    accumulate(out, t.value(b));
    return t.push(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a)) accumulate(t.grad_ref(a), g);
        if (t.requires_grad(b)) accumulate(t.grad_ref(b), g);
    });
}

Var add_row(Tape& t, Var a, Var row) {
    const Matrix& av = t.value(a);
    const Matrix& rv = t.value(row);
    if (rv.rows() != 1 || rv.cols() != av.cols())
        throw std::invalid_argument("add_row: row " + rv.shape_str() + " vs " + av.shape_str());
    Matrix out = av;
    for (int r = 0; r < out.rows(); ++r)
        for (int c = 0; c < out.cols(); ++c) out(r, c) += rv(0, c);
    return t.push(std::move(out), {a, row}, [a, row](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a)) accumulate(t.grad_ref(a), g);
        if (t.requires_grad(row)) {
            Matrix& gr = t.grad_ref(row);
            for (int r = 0; r < g.rows(); ++r)
                for (int c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c);
        }
    });
}

Var mul(Tape& t, Var a, Var b) {
    require_same(t.value(a), t.value(b), "mul");
    Matrix out = t.value(a);
    const Matrix& bv = t.value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return t.push(std::move(out), {a, b}, [a, b](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a)) {
            Matrix& ga = t.grad_ref(a);
            const Matrix& bv = t.value(b);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (t.requires_grad(b)) {
            Matrix& gb = t.grad_ref(b);
            const Matrix& av = t.value(a);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

Var scale(Tape& t, Var a, double s) {
    Matrix out = t.value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return t.push(std::move(out), {a}, [a, s](Tape& t, Var self) { accumulate(t.grad_ref(a), t.grad(self), s); });
}

Var exp(Tape& t, Var a) {
    Matrix out = t.value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
    return t.push(std::move(out), {a}, [a](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        const Matrix& y = t.value(self);
        Matrix& ga = t.grad_ref(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    });
}

Var gelu(Tape& t, Var a) {
    Matrix out;
    kernels::gelu_forward(t.value(a), out);
    return t.push(std::move(out), {a}, [a](Tape& t, Var self) {
        kernels::gelu_backward(t.value(a), t.grad(self), t.grad_ref(a));
    });
}

Var softmax_rows(Tape& t, Var a) {
    Matrix out = t.value(a);
    kernels::softmax_rows(out);
    return t.push(std::move(out), {a}, [a](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        const Matrix& y = t.value(self);
        Matrix& ga = t.grad_ref(a);
        for (int r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (int c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
            for (int c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - dot);
        }
    });
}

Var layernorm(Tape& t, Var x, Var gamma, Var beta, double eps) {
    auto xhat = std::make_shared<Matrix>();
    auto rstd = std::make_shared<std::vector<double>>();
    Matrix out;
    kernels::layernorm_forward(t.value(x), t.value(gamma).storage(), t.value(beta).storage(), eps, out, *xhat, *rstd);
    return t.push(std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat, rstd](Tape& t, Var self) {
        Matrix dgamma(1, xhat->cols()), dbeta(1, xhat->cols());
        Matrix dx(xhat->rows(), xhat->cols());
        kernels::layernorm_backward(t.grad(self), *xhat, *rstd, t.value(gamma).storage(), dx, dgamma.storage(),
                                    dbeta.storage());
        if (t.requires_grad(x)) accumulate(t.grad_ref(x), dx);
        if (t.requires_grad(gamma)) accumulate(t.grad_ref(gamma), dgamma);
        if (t.requires_grad(beta)) accumulate(t.grad_ref(beta), dbeta);
    });
}

Var embedding(Tape& t, Var table, std::span<const int> ids) {
    const Matrix& tv = t.value(table);
    Matrix out(static_cast<int>(ids.size()), tv.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= tv.rows())
            throw std::out_of_range("embedding: id " + std::to_string(ids[i]) + " outside table of " +
                                    std::to_string(tv.rows()));
        std::copy(tv.row(ids[i]).begin(), tv.row(ids[i]).end(), out.row(static_cast<int>(i)).begin());
    }
    std::vector<int> keep(ids.begin(), ids.end());
    return t.push(std::move(out), {table}, [table, keep = std::move(keep)](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        Matrix& gt = t.grad_ref(table);
        for (std::size_t i = 0; i < keep.size(); ++i) {
            auto src = g.row(static_cast<int>(i));
            auto dst = gt.row(keep[i]);
            for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
        }
    });
}

Var gather_rows(Tape& t, Var a, std::span<const int> rows) {
    return embedding(t, a, rows);
}

Var masked_mean_rows(Tape& t, Var a, int seq, std::span<const std::uint8_t> mask) {
    const Matrix& av = t.value(a);
    if (seq <= 0 || av.rows() % seq != 0 || mask.size() != static_cast<std::size_t>(av.rows()))
        throw std::invalid_argument("masked_mean_rows: layout mismatch");
    const int groups = av.rows() / seq;
    Matrix out(groups, av.cols());
    std::vector<double> inv(static_cast<std::size_t>(groups), 0.0);
    for (int gidx = 0; gidx < groups; ++gidx) {
        int n = 0;
        for (int i = 0; i < seq; ++i)
            if (mask[static_cast<std::size_t>(gidx * seq + i)]) {
                ++n;
                for (int c = 0; c < av.cols(); ++c) out(gidx, c) += av(gidx * seq + i, c);
            }
        inv[static_cast<std::size_t>(gidx)] = n > 0 ? 1.0 / n : 0.0;
        for (int c = 0; c < av.cols(); ++c) out(gidx, c) *= inv[static_cast<std::size_t>(gidx)];
    }
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    return t.push(std::move(out), {a}, [a, seq, m = std::move(m), inv = std::move(inv)](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        Matrix& ga = t.grad_ref(a);
        for (int r = 0; r < ga.rows(); ++r) {
            if (!m[static_cast<std::size_t>(r)]) continue;
            const int gidx = r / seq;
            for (int c = 0; c < ga.cols(); ++c) ga(r, c) += g(gidx, c) * inv[static_cast<std::size_t>(gidx)];
        }
    });
}

Var concat_cols(Tape& t, Var a, Var b) {
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    if (av.rows() != bv.rows()) throw std::invalid_argument("concat_cols: row mismatch");
    Matrix out(av.rows(), av.cols() + bv.cols());
    for (int r = 0; r < av.rows(); ++r) {
        for (int c = 0; c < av.cols(); ++c) out(r, c) = av(r, c);
        for (int c = 0; c < bv.cols(); ++c) out(r, av.cols() + c) = bv(r, c);
    }
    const int split = av.cols();
    return t.push(std::move(out), {a, b}, [a, b, split](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a)) {
            Matrix& ga = t.grad_ref(a);
            for (int r = 0; r < g.rows(); ++r)
                for (int c = 0; c < split; ++c) ga(r, c) += g(r, c);
        }
        if (t.requires_grad(b)) {
            Matrix& gb = t.grad_ref(b);
            for (int r = 0; r < g.rows(); ++r)
                for (int c = 0; c < gb.cols(); ++c) gb(r, c) += g(r, split + c);
        }
    });
}

Var concat_rows(Tape& t, Var a, Var b) {
    const Matrix& av = t.value(a);
    const Matrix& bv = t.value(b);
    if (av.cols() != bv.cols()) throw std::invalid_argument("concat_rows: column mismatch");
    Matrix out(av.rows() + bv.rows(), av.cols());
    std::copy(av.storage().begin(), av.storage().end(), out.storage().begin());
    std::copy(bv.storage().begin(), bv.storage().end(), out.storage().begin() + static_cast<std::ptrdiff_t>(av.size()));
    const std::size_t split = av.size();
    return t.push(std::move(out), {a, b}, [a, b, split](Tape& t, Var self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a)) {
            Matrix& ga = t.grad_ref(a);
            for (std::size_t i = 0; i < split; ++i) ga[i] += g[i];
        }
        if (t.requires_grad(b)) {
            Matrix& gb = t.grad_ref(b);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[split + i];
        }
    });
}

Var dropout(Tape& t, Var a, double p, std::mt19937_64& rng) {
    if (p <= 0.0) return a;
    if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
    const Matrix& av = t.value(a);
    Matrix mask(av.rows(), av.cols());
    std::bernoulli_distribution keep(1.0 - p);
    const double s = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? s : 0.0;
    return mul(t, a, t.constant(std::move(mask)));
}

Var attention(Tape& t, Var q, Var k, Var v, const kernels::AttentionShape& shape, std::vector<std::uint8_t> key_mask) {
    auto probs = std::make_shared<std::vector<double>>();
    Matrix out;
    kernels::attention_forward(shape, t.value(q), t.value(k), t.value(v), key_mask, out, *probs);
    return t.push(std::move(out), {q, k, v}, [q, k, v, shape, probs](Tape& t, Var self) {
        const Matrix& qv = t.value(q);
        Matrix dq(qv.rows(), qv.cols()), dk(qv.rows(), qv.cols()), dv(qv.rows(), qv.cols());
        kernels::attention_backward(shape, qv, t.value(k), t.value(v), *probs, t.grad(self), dq, dk, dv);
        if (t.requires_grad(q)) accumulate(t.grad_ref(q), dq);
        if (t.requires_grad(k)) accumulate(t.grad_ref(k), dk);
        if (t.requires_grad(v)) accumulate(t.grad_ref(v), dv);
    });
}

Var external_scalar(Tape& t, double value, std::vector<Var> inputs, std::vector<Matrix> grads) {
    if (inputs.size() != grads.size()) throw std::invalid_argument("external_scalar: inputs/grads size mismatch");
    for (std::size_t i = 0; i < inputs.size(); ++i) require_same(t.value(inputs[i]), grads[i], "external_scalar");
    auto shared = std::make_shared<std::vector<Matrix>>(std::move(grads));
    std::vector<Var> ins = inputs;
    return t.push(Matrix(1, 1, value), std::move(inputs), [ins, shared](Tape& t, Var self) {
        const double g = t.grad(self)(0, 0);
        for (std::size_t i = 0; i < ins.size(); ++i)
            if (t.requires_grad(ins[i])) accumulate(t.grad_ref(ins[i]), (*shared)[i], g);
    });
}

Var weighted_sum(Tape& t, std::span<const Var> terms, std::span<const double> coeffs) {
    if (terms.size() != coeffs.size()) throw std::invalid_argument("weighted_sum: size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) total += coeffs[i] * t.value(terms[i])(0, 0);
    std::vector<Var> ins(terms.begin(), terms.end());
    std::vector<double> cs(coeffs.begin(), coeffs.end());
    std::vector<Var> deps = ins;
    return t.push(Matrix(1, 1, total), std::move(deps), [ins, cs](Tape& t, Var self) {
        const double g = t.grad(self)(0, 0);
        for (std::size_t i = 0; i < ins.size(); ++i)
            if (t.requires_grad(ins[i])) t.grad_ref(ins[i])(0, 0) += g * cs[i];
    });
}

}  // namespace ad

}  // namespace hatewatch
