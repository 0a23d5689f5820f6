#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "nso/objectives.hpp"
#include "nso/perturbation.hpp"
#include "nso/rng.hpp"
#include "nso/vector.hpp"

namespace nso {

enum class NoiseKind { Exact, Isotropic, CoordinateAdversarial };

/// Additive noise law of a stochastic gradient oracle.
///
///   Exact                  no noise
///   Isotropic(sigma)       N(0, (sigma^2/d) I), so E||noise||^2 = sigma^2
///   CoordinateAdversarial  +-cap e_{step+1} with equal probability
struct NoiseModel {
    NoiseKind kind = NoiseKind::Exact;
    double level = 0.0;

    static NoiseModel exact() { return {}; }
    static NoiseModel isotropic(double sigma);
    static NoiseModel coordinate_adversarial(double cap);

    /// E||noise||^2.
    double variance() const noexcept { return kind == NoiseKind::Exact ? 0.0 : level * level; }
};

/// One realization of oracle noise. Either dense, or a single coordinate.
struct OracleNoise {
    static constexpr std::size_t kDense = std::numeric_limits<std::size_t>::max();

    std::size_t coordinate = kDense;
    double value = 0.0;
    Vector dense;

    bool is_zero() const noexcept { return coordinate == kDense && dense.dim() == 0; }
    void add_to(Vector& g) const;
    Vector to_vector(std::size_t dim) const;
};

/// Stochastic gradient source g_z(W) = grad f(W) + z. Owns its noise stream,
/// so an oracle is a single-owner value; parallel work clones it onto
/// disjoint streams.
class GradOracle {
public:
    GradOracle(ObjectivePtr objective, NoiseModel noise, RngStream rng);

    const Objective& objective() const noexcept { return *objective_; }
    const ObjectivePtr& objective_ptr() const noexcept { return objective_; }
    const NoiseModel& noise() const noexcept { return noise_; }
    std::size_t dim() const noexcept { return objective_->dim(); }

    /// Draws the noise for a query at `step`. The adversarial model rejects
    /// step + 1 >= d.
    OracleNoise draw(std::size_t step);
    /// grad f(w) + noise; counts one query.
    Vector query(const Vector& w, const OracleNoise& noise);
    Vector query(const Vector& w, std::size_t step) { return query(w, draw(step)); }

    std::uint64_t query_count() const noexcept { return queries_; }
    void reset_query_count() noexcept { queries_ = 0; }

    /// Same objective and noise law on another stream, with a fresh counter.
    GradOracle with_stream(RngStream rng) const { return {objective_, noise_, rng}; }
    const RngStream& stream() const noexcept { return rng_; }

private:
    ObjectivePtr objective_;
    NoiseModel noise_;
    RngStream rng_;
    std::uint64_t queries_ = 0;
};

GradOracle make_exact_oracle(ObjectivePtr objective);

struct NsoEstimate {
    Vector estimate;
    std::vector<Vector> perturbations;
    /// Noise shared by the (+U, -U) queries of each pair.
    std::vector<OracleNoise> noise;
};

/// (1/2k) sum_j [g(W + U_j) + g(W - U_j)] with U_j drawn from `dist` using
/// `rng`. Exactly 2k oracle queries; the two queries of a pair see the same
/// oracle noise draw, so the averaged noise has second moment sigma^2 / k.
NsoEstimate nso_gradient_estimate(GradOracle& oracle, const PerturbationDist& dist, const Vector& w, std::size_t k,
                                  std::size_t step, RngStream& rng);

/// Deterministic recomputation of an estimate from recorded randomness.
Vector nso_estimate_from(const Objective& objective, const Vector& w, const std::vector<Vector>& perturbations,
                         const std::vector<OracleNoise>& noise);

struct DeltaXi {
    double var_delta = 0.0;
    double var_xi = 0.0;
    double se_delta = 0.0;
    double se_xi = 0.0;
    /// True when delta was centred at a closed-form grad F rather than the sample mean.
    bool exact_center = false;
};

/// Monte Carlo E||delta||^2 and E||xi||^2 at W over m repetitions. Each
/// repetition draws one set of k perturbations and evaluates both the exact
/// and the noisy estimator on it, so xi is the noisy minus the exact estimate.
DeltaXi delta_xi_decomposition(const GradOracle& oracle, const PerturbationDist& dist, const Vector& w,
                               std::size_t k, std::size_t m, const RngStream& rng);

}  // namespace nso
