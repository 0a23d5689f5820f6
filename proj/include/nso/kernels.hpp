#pragma once

// Data-parallel inner loops. Every kernel exists twice: a plain serial
// reference and an OpenMP version. Both evaluate each output element with the
// same summation order, so the two agree bit for bit and results do not depend
// on the thread count.

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#include <omp.h>

namespace nso::kernels {

/// Fixed reduction block; partial sums are formed per block and combined in
/// block order.
inline constexpr std::size_t kReduceBlock = 256;

inline std::size_t block_count(std::size_t count) noexcept {
    return (count + kReduceBlock - 1) / kReduceBlock;
}

namespace serial {

/// out[i] = <rows[i], x> for a row-major n x p matrix.
void row_dots(std::span<const double> rows, std::size_t p, std::span<const double> x, std::span<double> out);

/// out[j] = sum_i weights[i] * rows[i][j], accumulated in increasing i.
void weighted_row_sum(std::span<const double> rows, std::size_t p, std::span<const double> weights,
                      std::span<double> out);

/// sum_{i < count} term(i), blocked.
template <class Term>
double reduce_sum(std::size_t count, Term&& term) {
    const std::size_t blocks = block_count(count);
    std::vector<double> partial(blocks, 0.0);
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t end = std::min(count, (b + 1) * kReduceBlock);
        double s = 0.0;
        for (std::size_t i = b * kReduceBlock; i < end; ++i) s += term(i);
        partial[b] = s;
    }
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

/// Vector-valued blocked reduction; term(i, acc) adds its contribution into acc.
template <class Term>
std::vector<double> reduce_vector_sum(std::size_t count, std::size_t dim, Term&& term) {
    const std::size_t blocks = block_count(count);
    std::vector<std::vector<double>> partial(blocks, std::vector<double>(dim, 0.0));
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t end = std::min(count, (b + 1) * kReduceBlock);
        for (std::size_t i = b * kReduceBlock; i < end; ++i) term(i, partial[b]);
    }
    std::vector<double> total(dim, 0.0);
    for (const auto& s : partial)
        for (std::size_t j = 0; j < dim; ++j) total[j] += s[j];
    return total;
}

}  // namespace serial

namespace parallel {

void row_dots(std::span<const double> rows, std::size_t p, std::span<const double> x, std::span<double> out);

void weighted_row_sum(std::span<const double> rows, std::size_t p, std::span<const double> weights,
                      std::span<double> out);

template <class Term>
double reduce_sum(std::size_t count, Term&& term) {
    const std::size_t blocks = block_count(count);
    std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(dynamic, 1) if (blocks > 1)
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t end = std::min(count, (b + 1) * kReduceBlock);
        double s = 0.0;
        for (std::size_t i = b * kReduceBlock; i < end; ++i) s += term(i);
        partial[b] = s;
    }
    double total = 0.0;
    for (double s : partial) total += s;
    return total;
}

template <class Term>
std::vector<double> reduce_vector_sum(std::size_t count, std::size_t dim, Term&& term) {
    const std::size_t blocks = block_count(count);
    std::vector<std::vector<double>> partial(blocks, std::vector<double>(dim, 0.0));
#pragma omp parallel for schedule(dynamic, 1) if (blocks > 1)
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t end = std::min(count, (b + 1) * kReduceBlock);
        for (std::size_t i = b * kReduceBlock; i < end; ++i) term(i, partial[b]);
    }
    std::vector<double> total(dim, 0.0);
    for (const auto& s : partial)
        for (std::size_t j = 0; j < dim; ++j) total[j] += s[j];
    return total;
}

/// Runs body(i) for every i in [0, count); each index must write only its own
/// output slot. An exception from any index is rethrown after the loop (the
/// lowest failing index wins, so the error does not depend on scheduling).
template <class Body>
void for_each_index(std::size_t count, Body&& body) {
    std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic, 1) if (count > 1)
    for (std::size_t i = 0; i < count; ++i) {
        try {
            body(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace parallel

/// Sets the OpenMP team size used by the parallel kernels (n >= 1).
void set_thread_count(int n);
int thread_count();

}  // namespace nso::kernels
