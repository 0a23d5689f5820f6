#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "nso/rng.hpp"
#include "nso/vector.hpp"

namespace nso {

enum class PerturbationKind { IsotropicGaussian, Laplace, Uniform, Binomial, TruncatedGaussian };

std::string_view to_string(PerturbationKind kind) noexcept;
/// Accepts "gaussian", "laplace", "uniform", "binomial", "truncated_gaussian".
PerturbationKind parse_perturbation_kind(std::string_view name);

/// Mean-zero product law over R^d with per-coordinate standard deviation
/// sigma (before truncation).
///
///   IsotropicGaussian   N(0, sigma^2)
///   Laplace             scale sigma / sqrt(2)
///   Uniform             U[-sigma*sqrt(3), +sigma*sqrt(3)]
///   Binomial            sigma * (2 Bernoulli(1/2) - 1)
///   TruncatedGaussian   N(0, sigma^2) clipped to [-caps[i], +caps[i]]
///
/// Caps may be +infinity, which leaves that coordinate untruncated.
class PerturbationDist {
public:
    PerturbationDist(PerturbationKind kind, double sigma, std::size_t dim);
    PerturbationDist(double sigma, std::vector<double> caps);

    static PerturbationDist gaussian(double sigma, std::size_t dim) {
        return {PerturbationKind::IsotropicGaussian, sigma, dim};
    }
    static PerturbationDist truncated(double sigma, std::vector<double> caps) {
        return {sigma, std::move(caps)};
    }

    PerturbationKind kind() const noexcept { return kind_; }
    double sigma() const noexcept { return sigma_; }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<double>& caps() const noexcept { return caps_; }

    Vector sample(RngStream& rng) const;
    /// E[U_i^2] for coordinate i.
    double coordinate_second_moment(std::size_t i) const;
    /// E||U||^2.
    double h_moment() const;
    /// Smallest b with |U_i| <= b almost surely (+inf for unbounded laws).
    double support_bound(std::size_t i) const;

private:
    PerturbationKind kind_;
    double sigma_;
    std::size_t dim_;
    std::vector<double> caps_;
};

inline Vector sample_perturbation(const PerturbationDist& dist, RngStream& rng) { return dist.sample(rng); }
inline double h_moment(const PerturbationDist& dist) { return dist.h_moment(); }

/// E[clip(X, -cap, cap)^2] for X ~ N(0, sigma^2).
double clipped_gaussian_second_moment(double sigma, double cap);

}  // namespace nso
