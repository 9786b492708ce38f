#include "uncproxy/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uncproxy/error.hpp"

namespace uncproxy {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        fail(ErrorKind::invalid_input, "matrix data length " + std::to_string(data_.size()) + " != " +
                                           std::to_string(rows_) + "x" + std::to_string(cols_));
    if (!all_finite()) fail(ErrorKind::invalid_input, "matrix contains non-finite values");
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace uncproxy
