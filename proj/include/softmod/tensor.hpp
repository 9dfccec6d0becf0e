#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "softmod/errors.hpp"

namespace softmod {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense float64 value of rank 1 or 2, stored row-major. A rank-1 tensor of
// length n is laid out as a 1 x n matrix so every kernel sees a matrix.
class Tensor {
public:
    Tensor() : data_(1, 0), rank_(1) {}

    static Tensor vector(std::vector<double> values);
    static Tensor vector(std::initializer_list<double> values) {
        return vector(std::vector<double>(values));
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor zeros(std::size_t rows, std::size_t cols) {
        return Tensor(Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)));
    }
    static Tensor zeros_vector(std::size_t n) { return Tensor(Matrix::Zero(1, static_cast<Eigen::Index>(n)), 1); }
    static Tensor scalar(double v) { return Tensor(Matrix::Constant(1, 1, v)); }

    // Wraps an already computed matrix. Finiteness is not re-checked here;
    // kernels produce these.
    explicit Tensor(Matrix m, int rank = 2) : data_(std::move(m)), rank_(rank) {}

    int rank() const { return rank_; }
    std::size_t rows() const { return static_cast<std::size_t>(data_.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(data_.cols()); }
    std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
    std::vector<std::size_t> shape() const;
    std::string shape_string() const;

    double operator[](std::size_t i) const { return data_.data()[i]; }
    double at(std::size_t r, std::size_t c) const {
        return data_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    double item() const;

    std::span<const double> values() const { return {data_.data(), size()}; }
    std::vector<double> to_vector() const { return {data_.data(), data_.data() + size()}; }
    const Matrix& mat() const { return data_; }

    bool same_shape(const Tensor& other) const {
        return data_.rows() == other.data_.rows() && data_.cols() == other.data_.cols();
    }

private:
    Matrix data_;
    int rank_;
};

/// Throws ContractError unless every value is finite.
void require_finite(std::span<const double> values, const char* what);

}  // namespace softmod
