#include "feddtg/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "feddtg/error.hpp"

namespace feddtg::nn {

Tensor::Tensor(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("tensor data length", rows_ * cols_, data_.size());
    }
}

Tensor Tensor::checked(std::size_t rows, std::size_t cols, std::vector<double> data) {
    Tensor t(rows, cols, std::move(data));
    if (!t.all_finite()) throw ParameterError("tensor contains non-finite values");
    return t;
}

Tensor Tensor::gather_rows(std::span<const std::size_t> indices) const {
    Tensor out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) throw DimensionError("row index bound", rows_, indices[i]);
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                    out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
    }
    return out;
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) throw DimensionError("concat row count", a.rows(), b.rows());
    Tensor out(a.rows(), a.cols() + b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto dst = out.row(r);
        std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
        std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
    }
    return out;
}

}  // namespace feddtg::nn
