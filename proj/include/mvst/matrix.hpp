#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mvst {

/// Row-major dense matrix of doubles used by the signal front-end.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
        if (values.size() != r * c) throw std::invalid_argument("Matrix: value count does not match shape");
    }

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    bool empty() const noexcept { return values.empty(); }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

}  // namespace mvst
