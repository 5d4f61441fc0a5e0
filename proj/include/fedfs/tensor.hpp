#pragma once

#include <cstddef>
#include <vector>

namespace fedfs {

/// Dense row-major matrix of 64-bit reals.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
    bool all_finite() const;
};

/// out = a * b. Shapes: (n x k) * (k x m) -> (n x m).
void matmul(const Tensor2& a, const Tensor2& b, Tensor2& out);

/// out = a^T * b. Shapes: (k x n)^T * (k x m) -> (n x m).
void matmul_at_b(const Tensor2& a, const Tensor2& b, Tensor2& out);

/// out = a * b^T. Shapes: (n x k) * (m x k)^T -> (n x m).
void matmul_a_bt(const Tensor2& a, const Tensor2& b, Tensor2& out);

}  // namespace fedfs
