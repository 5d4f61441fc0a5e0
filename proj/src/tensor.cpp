#include "fedfs/tensor.hpp"

#include <cmath>

#include "fedfs/errors.hpp"

namespace fedfs {

bool Tensor2::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void matmul(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    if (a.cols != b.rows) throw DimensionError("matmul: inner dimensions differ");
    out = Tensor2(a.rows, b.cols);
    const std::size_t n = a.rows, k = a.cols, m = b.cols;
    for (std::size_t i = 0; i < n; ++i) {
        const double* __restrict__ ai = a.row(i);
        double* __restrict__ ci = out.row(i);
        for (std::size_t l = 0; l < k; ++l) {
            const double av = ai[l];
            const double* __restrict__ bl = b.row(l);
            for (std::size_t j = 0; j < m; ++j) ci[j] += av * bl[j];
        }
    }
}

void matmul_at_b(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    if (a.rows != b.rows) throw DimensionError("matmul_at_b: row counts differ");
    out = Tensor2(a.cols, b.cols);
    const std::size_t k = a.rows, n = a.cols, m = b.cols;
    for (std::size_t l = 0; l < k; ++l) {
        const double* __restrict__ al = a.row(l);
        const double* __restrict__ bl = b.row(l);
        for (std::size_t i = 0; i < n; ++i) {
            const double av = al[i];
            double* __restrict__ ci = out.row(i);
            for (std::size_t j = 0; j < m; ++j) ci[j] += av * bl[j];
        }
    }
}

void matmul_a_bt(const Tensor2& a, const Tensor2& b, Tensor2& out) {
    if (a.cols != b.cols) throw DimensionError("matmul_a_bt: column counts differ");
    out = Tensor2(a.rows, b.rows);
    const std::size_t n = a.rows, k = a.cols, m = b.rows;
    for (std::size_t i = 0; i < n; ++i) {
        const double* __restrict__ ai = a.row(i);
        double* __restrict__ ci = out.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            const double* __restrict__ bj = b.row(j);
            double acc = 0.0;
            for (std::size_t l = 0; l < k; ++l) acc += ai[l] * bj[l];
            ci[j] = acc;
        }
    }
}

}  // namespace fedfs
