// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hatewatch/kernels.hpp"
#include "hatewatch/tensor.hpp"

namespace hatewatch {

/// A trainable tensor with its accumulated gradient.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
};

/// Ordered, name-addressable collection of parameters. Copying a store
/// copies every value, which is how teacher snapshots are taken.
class ParameterStore {
public:
    int add(const std::string& name, Matrix init);
    int index_of(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Parameter& at(int id) { return params_.at(static_cast<std::size_t>(id)); }
    const Parameter& at(int id) const { return params_.at(static_cast<std::size_t>(id)); }
    int size() const { return static_cast<int>(params_.size()); }
    std::span<Parameter> all() { return params_; }
    std::span<const Parameter> all() const { return params_; }

    void zero_grad();
    std::size_t scalar_count() const;
    /// Copy parameter values (not gradients) from a store with the same layout.
    void assign_values(const ParameterStore& other);

private:
    std::vector<Parameter> params_;
    std::map<std::string, int> index_;
};

/// Handle to a node on a tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode automatic differentiation over dense matrices. A tape lives
/// for one forward/backward pass.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, Var self)>;

    explicit Tape(ParameterStore* params = nullptr) : params_(params), writable_(params) {}

    /// Forward-only tape over a read-only store: parameter nodes carry no
    /// gradient and backward() is a no-op.
    static Tape inference(const ParameterStore& params);

    Var constant(Matrix value);
    /// Leaf that receives a gradient; used by tests and by custom pipelines.
    Var input(Matrix value);
    Var param(int param_id);

    const Matrix& value(Var v) const;
    /// Gradient accumulated at `v`; an empty matrix if none reached it.
    const Matrix& grad(Var v) const;
    bool requires_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad; }

    /// Seeds d(root)/d(root) = 1 for a 1x1 root and runs all backward closures.
    void backward(Var root);

    int node_count() const { return static_cast<int>(nodes_.size()); }

    // Used by op implementations.
    Var push(Matrix value, std::vector<Var> inputs, BackwardFn fn);
    Matrix& grad_ref(Var v);
    bool has_grad(Var v) const;
    const ParameterStore* params() const { return params_; }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        int param = -1;
        bool requires_grad = false;
        BackwardFn backward;
    };
    const ParameterStore* params_;
    ParameterStore* writable_;
    std::vector<Node> nodes_;
    Matrix empty_;
};

/// Differentiable operations. All take and return tape handles.
namespace ad {

Var matmul(Tape& t, Var a, Var b);
/// a * b^T
Var matmul_bt(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
/// Adds a 1 x n row to every row of a.
Var add_row(Tape& t, Var a, Var row);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
Var exp(Tape& t, Var a);
Var gelu(Tape& t, Var a);
Var softmax_rows(Tape& t, Var a);
Var layernorm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);
/// Rows of `table` selected by `ids`.
Var embedding(Tape& t, Var table, std::span<const int> ids);
Var gather_rows(Tape& t, Var a, std::span<const int> rows);
/// Masked mean of each block of `seq` consecutive rows.
Var masked_mean_rows(Tape& t, Var a, int seq, std::span<const std::uint8_t> mask);
Var concat_cols(Tape& t, Var a, Var b);
/// Rows of a followed by rows of b.
Var concat_rows(Tape& t, Var a, Var b);
/// Inverted dropout; identity when p == 0.
Var dropout(Tape& t, Var a, double p, std::mt19937_64& rng);
Var attention(Tape& t, Var q, Var k, Var v, const kernels::AttentionShape& shape,
              std::vector<std::uint8_t> key_mask);
/// Scalar node whose value and input gradients were computed externally.
Var external_scalar(Tape& t, double value, std::vector<Var> inputs, std::vector<Matrix> grads);
/// sum_i coeff_i * term_i over 1x1 terms.
Var weighted_sum(Tape& t, std::span<const Var> terms, std::span<const double> coeffs);

}  // namespace ad

}  // namespace hatewatch
