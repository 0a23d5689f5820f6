#include "nso/kernels.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace nso::kernels {

namespace {

void check_shapes(std::span<const double> rows, std::size_t p, std::size_t n, const char* what) {
    if (p == 0 || rows.size() != n * p) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

// Rows below this many multiply-adds stay on the calling thread.
constexpr std::size_t kParallelWork = 1 << 15;

// Dot product with eight interleaved partial sums combined in a fixed tree,
// so the dependency chain is short and the order never changes.
double lane_dot(const double* a, const double* b, std::size_t p) {
    double acc[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    std::size_t j = 0;
    for (; j + 8 <= p; j += 8)
        for (std::size_t l = 0; l < 8; ++l) acc[l] += a[j + l] * b[j + l];
    for (std::size_t l = 0; j < p; ++j, ++l) acc[l] += a[j] * b[j];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

}  // namespace

namespace serial {

void row_dots(std::span<const double> rows, std::size_t p, std::span<const double> x, std::span<double> out) {
    check_shapes(rows, p, out.size(), "row_dots");
    if (x.size() != p) throw std::invalid_argument("row_dots: vector length mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = lane_dot(rows.data() + i * p, x.data(), p);
    }
}

void weighted_row_sum(std::span<const double> rows, std::size_t p, std::span<const double> weights,
                      std::span<double> out) {
    check_shapes(rows, p, weights.size(), "weighted_row_sum");
    if (out.size() != p) throw std::invalid_argument("weighted_row_sum: output length mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double* row = rows.data() + i * p;
        const double w = weights[i];
        for (std::size_t j = 0; j < p; ++j) out[j] += w * row[j];
    }
}

}  // namespace serial

namespace parallel {

void row_dots(std::span<const double> rows, std::size_t p, std::span<const double> x, std::span<double> out) {
    check_shapes(rows, p, out.size(), "row_dots");
    if (x.size() != p) throw std::invalid_argument("row_dots: vector length mismatch");
    const std::size_t n = out.size();
#pragma omp parallel for schedule(static) if (n * p > kParallelWork)
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = lane_dot(rows.data() + i * p, x.data(), p);
    }
}

void weighted_row_sum(std::span<const double> rows, std::size_t p, std::span<const double> weights,
                      std::span<double> out) {
    check_shapes(rows, p, weights.size(), "weighted_row_sum");
    if (out.size() != p) throw std::invalid_argument("weighted_row_sum: output length mismatch");
    const std::size_t n = weights.size();
    constexpr std::size_t kColumns = 64;
    const std::size_t column_blocks = (p + kColumns - 1) / kColumns;
#pragma omp parallel for schedule(static) if (n * p > kParallelWork)
    for (std::size_t cb = 0; cb < column_blocks; ++cb) {
        const std::size_t lo = cb * kColumns;
        const std::size_t hi = std::min(p, lo + kColumns);
        for (std::size_t j = lo; j < hi; ++j) out[j] = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = rows.data() + i * p;
            const double w = weights[i];
            for (std::size_t j = lo; j < hi; ++j) out[j] += w * row[j];
        }
    }
}

}  // namespace parallel

void set_thread_count(int n) {
    if (n < 1) throw std::invalid_argument("thread count must be >= 1");
    omp_set_num_threads(n);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace nso::kernels
