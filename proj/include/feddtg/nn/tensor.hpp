#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace feddtg::nn {

/// Row-major float64 tensor. The engine only uses rank-2 (batch, features).
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

    /// Like the constructor, but additionally rejects NaN/Inf.
    static Tensor checked(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    /// Copies the listed rows, in order.
    Tensor gather_rows(std::span<const std::size_t> indices) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Horizontal concatenation [a | b]; row counts must agree.
Tensor concat_cols(const Tensor& a, const Tensor& b);

}  // namespace feddtg::nn
