#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace confound {

// Row-major dense matrix of doubles. Small fixed surface: the linear algebra
// in this project never goes past solving (p+1) x (p+1) normal equations.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * cols, cols};
    }
    std::span<double> row(std::size_t i) {
        return {values.data() + i * cols, cols};
    }

    bool operator==(const Matrix&) const = default;
};

// Solves A x = b for symmetric positive definite A (in-place Cholesky).
// Throws NumericError when A is not positive definite.
std::vector<double> solve_spd(Matrix a, std::vector<double> b);

}  // namespace confound
