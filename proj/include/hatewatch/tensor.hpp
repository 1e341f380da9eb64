// Copyright (c) 2026, The HateWatch Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hatewatch {

/// Dense row-major matrix of doubles. Vectors are 1 x n matrices.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative shape");
    }
    Matrix(int rows, int cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != static_cast<std::size_t>(rows) * cols)
            throw std::invalid_argument("Matrix: data size does not match shape");
    }

    static Matrix row_vector(std::span<const double> v) {
        return Matrix(1, static_cast<int>(v.size()), std::vector<double>(v.begin(), v.end()));
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    std::span<double> row(int r) { return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)}; }
    std::span<const double> row(int r) const {
        return {data_.data() + static_cast<std::size_t>(r) * cols_, static_cast<std::size_t>(cols_)};
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

}  // namespace hatewatch
