#include "pngnn/diff/array.hpp"

#include "pngnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace pngnn::diff {

Array::Array(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill), cols_(cols) {}

Array::Array(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    const std::size_t expected = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                                 std::multiplies<>());
    if (shape_.empty() || expected != data_.size()) {
        throw ShapeError("array: data length " + std::to_string(data_.size()) +
                         " does not match shape product " + std::to_string(expected));
    }
    cols_ = shape_.size() == 1 ? 1 : expected / shape_[0];
    if (shape_[0] == 0) {
        cols_ = std::accumulate(shape_.begin() + 1, shape_.end(), std::size_t{1}, std::multiplies<>());
    }
}

Array Array::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n == 0 ? 0 : rows.begin()->size();
    Array out(n, m);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != m) {
            throw ShapeError("array: ragged row list");
        }
        std::copy(row.begin(), row.end(), out.row(r++).begin());
    }
    return out;
}

Array Array::row_vector(std::span<const double> values) {
    Array out(1, values.size());
    std::copy(values.begin(), values.end(), out.values().begin());
    return out;
}

std::size_t Array::cols() const noexcept { return cols_; }

void Array::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Array::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Array& Array::operator+=(const Array& other) {
    if (other.data_.size() != data_.size()) {
        throw ShapeError("array +=: size mismatch");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += other.data_[i];
    }
    return *this;
}

double max_abs_diff(const Array& a, const Array& b) {
    if (a.size() != b.size()) {
        throw ShapeError("max_abs_diff: size mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

} // namespace pngnn::diff
