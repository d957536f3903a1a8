#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace pngnn::diff {

// Dense row-major array of doubles. Most operations treat it as a matrix of
// shape()[0] rows by the product of the remaining extents.
class Array {
public:
    Array() = default;
    Array(std::size_t rows, std::size_t cols, double fill = 0.0);
    Array(std::vector<std::size_t> shape, std::vector<double> values);

    static Array from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Array row_vector(std::span<const double> values);
    static Array row_vector(std::initializer_list<double> values) {
        return row_vector(std::span<const double>(values.begin(), values.size()));
    }
    static Array scalar(double value) { return Array(1, 1, value); }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
    std::size_t cols() const noexcept;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    void fill(double value);
    bool same_shape(const Array& other) const noexcept { return shape_ == other.shape_; }
    bool all_finite() const noexcept;

    // Element-wise in-place accumulate; shapes must match.
    Array& operator+=(const Array& other);

    bool operator==(const Array& other) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
    std::size_t cols_ = 0;
};

double max_abs_diff(const Array& a, const Array& b);

} // namespace pngnn::diff
