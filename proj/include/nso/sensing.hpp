#pragma once

// Low-rank matrix sensing: recover X* = U* U*^T from y_i = <A_i, X*> by
// minimizing L(W) = (1/2n) sum_i (<A_i, W W^T> - y_i)^2 over square W.
//
// W is a d x d matrix flattened row-major into a Vector of length d^2.
// Only sym(A_i) enters the loss, so each measurement is also stored in a
// packed upper-triangular form of length d(d+1)/2 which halves the work of
// the hot loops.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "nso/objectives.hpp"
#include "nso/rng.hpp"
#include "nso/vector.hpp"

namespace nso {

inline std::size_t packed_size(std::size_t d) noexcept { return d * (d + 1) / 2; }

/// Upper triangle of a symmetric d x d matrix, row by row.
std::vector<double> pack_symmetric(std::span<const double> m, std::size_t d);
/// Packs W W^T without forming the full product.
std::vector<double> pack_gram(std::span<const double> w, std::size_t d, std::size_t cols);

class MeasurementSet {
public:
    /// n matrices with i.i.d. N(0,1) entries drawn from `rng`.
    static MeasurementSet generate(std::size_t d, std::size_t n, RngStream& rng);

    std::size_t d() const noexcept { return d_; }
    std::size_t size() const noexcept { return n_; }
    std::span<const double> full(std::size_t i) const { return {full_.data() + i * d_ * d_, d_ * d_}; }
    std::span<const double> full_rows() const noexcept { return full_; }
    /// Packed rows such that dot(packed(i), pack_symmetric(X)) = <A_i, X> for symmetric X.
    std::span<const double> packed_rows() const noexcept { return packed_; }
    std::span<const double> packed(std::size_t i) const {
        return {packed_.data() + i * packed_size(d_), packed_size(d_)};
    }
    const std::vector<double>& targets() const noexcept { return y_; }

    /// <A_i, X> for every i, X given packed.
    std::vector<double> responses(std::span<const double> x_packed, bool parallel = true) const;
    /// y_i = <A_i, U U^T> for a d x r factor.
    void set_targets_from_factor(std::span<const double> u, std::size_t r);

private:
    std::size_t d_ = 0;
    std::size_t n_ = 0;
    std::vector<double> full_;
    std::vector<double> packed_;
    std::vector<double> y_;
};

struct SensingInstance {
    std::size_t d = 0;
    std::size_t r = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    /// d x r ground-truth factor, row-major.
    std::vector<double> u_star;
    std::shared_ptr<const MeasurementSet> train;

    /// U* padded with zero columns to d x d, as a flattened point.
    Vector padded_truth() const;
    /// `count` fresh measurements of the same X*.
    std::shared_ptr<const MeasurementSet> fresh_measurements(std::size_t count, std::uint64_t index) const;
};

/// Draws U* and the n measurement matrices from children of `rng`.
/// The instance is a pure function of (rng.seed(), rng.stream_id(), d, r, n).
SensingInstance make_sensing_instance(std::size_t d, std::size_t r, std::size_t n, const RngStream& rng);
inline std::size_t default_measurements(std::size_t d, std::size_t r) noexcept { return 5 * d * r; }

enum class KernelMode { Serial, Parallel };

class SensingObjective final : public Objective {
public:
    explicit SensingObjective(std::shared_ptr<const MeasurementSet> data, KernelMode mode = KernelMode::Parallel);

    std::string name() const override { return "matrix_sensing"; }
    std::size_t dim() const override { return d_ * d_; }
    std::size_t side() const noexcept { return d_; }
    const MeasurementSet& data() const noexcept { return *data_; }

    double value(const Vector& w) const override;
    Vector gradient(const Vector& w) const override;
    Vector hvp(const Vector& w, const Vector& v) const override;
    /// The gradient is only locally Lipschitz.
    double lipschitz() const override;

    /// Residuals <A_i, W W^T> - y_i.
    std::vector<double> residuals(const Vector& w) const;
    /// (1/n) sum_i r_i^2.
    double mse(const Vector& w) const;
    /// Exact tr of the Hessian: (1/n) sum_i [4 ||S_i W||_F^2 + 2 r_i d tr(S_i)], S_i = sym(A_i).
    double hessian_trace(const Vector& w) const;

    /// True when the gradient goes through the packed Gram matrix K^T K and
    /// K^T y (K the packed rows), chosen when it needs fewer multiply-adds
    /// than two passes over K.
    bool uses_gram() const noexcept { return !gram_.empty(); }

private:
    // d x d symmetric matrix from a packed weighted sum of rows.
    std::vector<double> unpack_weighted(std::span<const double> packed_sum) const;
    std::vector<double> weighted_sum(std::span<const double> weights) const;

    std::shared_ptr<const MeasurementSet> data_;
    KernelMode mode_;
    std::size_t d_;
    std::vector<double> gram_;
    std::vector<double> gram_rhs_;
};

struct MatrixSensing {
    SensingInstance instance;
    std::shared_ptr<const SensingObjective> objective;
};

/// Rejects r > d, r < 1 or n < 1.
MatrixSensing make_matrix_sensing(std::size_t d, std::size_t r, std::size_t n, const RngStream& rng,
                                  KernelMode mode = KernelMode::Parallel);

/// (1/n) sum_i ||A_i W||_F^2 with the full (unsymmetrized) matrices.
double sensing_trace_formula(const MeasurementSet& data, const Vector& w);
inline double sensing_trace_formula(const SensingInstance& inst, const Vector& w) {
    return sensing_trace_formula(*inst.train, w);
}
/// |formula - d ||W||_F^2| / (d ||W||_F^2).
double sensing_trace_deviation(const MeasurementSet& data, const Vector& w);

/// JSON with fields d, r, n, seed, stream_id; matrices are regenerated on load.
void save_sensing_instance(const SensingInstance& inst, const std::filesystem::path& path);
SensingInstance load_sensing_instance(const std::filesystem::path& path);

}  // namespace nso
