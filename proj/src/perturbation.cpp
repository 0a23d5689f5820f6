#include "nso/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nso {

std::string_view to_string(PerturbationKind kind) noexcept {
    switch (kind) {
        case PerturbationKind::IsotropicGaussian: return "gaussian";
        case PerturbationKind::Laplace: return "laplace";
        case PerturbationKind::Uniform: return "uniform";
        case PerturbationKind::Binomial: return "binomial";
        case PerturbationKind::TruncatedGaussian: return "truncated_gaussian";
    }
    return "unknown";
}

PerturbationKind parse_perturbation_kind(std::string_view name) {
    if (name == "gaussian") return PerturbationKind::IsotropicGaussian;
    if (name == "laplace") return PerturbationKind::Laplace;
    if (name == "uniform") return PerturbationKind::Uniform;
    if (name == "binomial") return PerturbationKind::Binomial;
    if (name == "truncated_gaussian") return PerturbationKind::TruncatedGaussian;
    throw std::invalid_argument("unknown perturbation kind '" + std::string(name) + "'");
}

PerturbationDist::PerturbationDist(PerturbationKind kind, double sigma, std::size_t dim)
    : kind_(kind), sigma_(sigma), dim_(dim) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("PerturbationDist: sigma must be finite and >= 0");
    if (dim == 0) throw std::invalid_argument("PerturbationDist: dim must be >= 1");
    if (kind == PerturbationKind::TruncatedGaussian)
        caps_.assign(dim, std::numeric_limits<double>::infinity());
}

PerturbationDist::PerturbationDist(double sigma, std::vector<double> caps)
    : kind_(PerturbationKind::TruncatedGaussian), sigma_(sigma), dim_(caps.size()), caps_(std::move(caps)) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("PerturbationDist: sigma must be finite and >= 0");
    if (dim_ == 0) throw std::invalid_argument("PerturbationDist: caps must be non-empty");
    for (double cap : caps_)
        if (!(cap > 0.0)) throw std::invalid_argument("PerturbationDist: truncation caps must be > 0");
}

Vector PerturbationDist::sample(RngStream& rng) const {
    Vector u(dim_);
    switch (kind_) {
        case PerturbationKind::IsotropicGaussian:
            for (std::size_t i = 0; i < dim_; ++i) u[i] = sigma_ * rng.normal();
            break;
        case PerturbationKind::Laplace: {
            const double b = sigma_ / std::numbers::sqrt2;
            for (std::size_t i = 0; i < dim_; ++i) {
                // Exponential magnitude with an independent sign.
                const double sign = rng.rademacher();
                u[i] = -sign * b * std::log(rng.uniform());
            }
            break;
        }
        case PerturbationKind::Uniform: {
            const double half_width = sigma_ * std::numbers::sqrt3;
            for (std::size_t i = 0; i < dim_; ++i) u[i] = half_width * (2.0 * rng.uniform() - 1.0);
            break;
        }
        case PerturbationKind::Binomial:
            for (std::size_t i = 0; i < dim_; ++i) u[i] = sigma_ * rng.rademacher();
            break;
        case PerturbationKind::TruncatedGaussian:
            for (std::size_t i = 0; i < dim_; ++i) u[i] = std::clamp(sigma_ * rng.normal(), -caps_[i], caps_[i]);
            break;
    }
    return u;
}

double clipped_gaussian_second_moment(double sigma, double cap) {
    if (sigma == 0.0) return 0.0;
    if (std::isinf(cap)) return sigma * sigma;
    const double z = cap / sigma;
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    const double inside = std::erf(z / std::numbers::sqrt2) - 2.0 * z * pdf;
    const double outside = z * z * std::erfc(z / std::numbers::sqrt2);
    return sigma * sigma * (inside + outside);
}

double PerturbationDist::coordinate_second_moment(std::size_t i) const {
    if (i >= dim_) throw std::invalid_argument("coordinate_second_moment: index out of range");
    if (kind_ == PerturbationKind::TruncatedGaussian) return clipped_gaussian_second_moment(sigma_, caps_[i]);
    return sigma_ * sigma_;
}

double PerturbationDist::h_moment() const {
    if (kind_ != PerturbationKind::TruncatedGaussian) return sigma_ * sigma_ * static_cast<double>(dim_);
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += clipped_gaussian_second_moment(sigma_, caps_[i]);
    return s;
}

double PerturbationDist::support_bound(std::size_t i) const {
    if (i >= dim_) throw std::invalid_argument("support_bound: index out of range");
    switch (kind_) {
        case PerturbationKind::Uniform: return sigma_ * std::numbers::sqrt3;
        case PerturbationKind::Binomial: return sigma_;
        case PerturbationKind::TruncatedGaussian: return sigma_ == 0.0 ? 0.0 : caps_[i];
        case PerturbationKind::IsotropicGaussian:
        case PerturbationKind::Laplace: return sigma_ == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
}

}  // namespace nso
