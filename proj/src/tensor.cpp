#include "softmod/tensor.hpp"

#include <cmath>
#include <sstream>

namespace softmod {

Tensor Tensor::vector(std::vector<double> values) {
    require_finite(values, "Tensor::vector");
    Matrix m(1, static_cast<Eigen::Index>(values.size()));
    std::copy(values.begin(), values.end(), m.data());
    return Tensor(std::move(m), 1);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols) {
        std::ostringstream os;
        os << "Tensor::matrix: " << values.size() << " values for shape [" << rows << "x" << cols << "]";
        throw DimensionError(os.str());
    }
    require_finite(values, "Tensor::matrix");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::copy(values.begin(), values.end(), m.data());
    return Tensor(std::move(m));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> flat;
    flat.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("Tensor::matrix: ragged rows");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return matrix(r, c, std::move(flat));
}

std::vector<std::size_t> Tensor::shape() const {
    if (rank_ == 1) return {cols()};
    return {rows(), cols()};
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << "[";
    const auto s = shape();
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("Tensor::item on tensor of shape " + shape_string());
    return data_(0, 0);
}

void require_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) throw ContractError(std::string(what) + ": non-finite value");
    }
}

}  // namespace softmod
