#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nso/perturbation.hpp"
#include "nso/vector.hpp"

namespace nso {

/// Differentiable test function over R^d. Implementations are immutable after
/// construction, so value/gradient/hvp may be called concurrently.
class Objective {
public:
    virtual ~Objective() = default;

    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;
    virtual double value(const Vector& w) const = 0;
    virtual Vector gradient(const Vector& w) const = 0;
    /// Hessian-vector product. The default is a central difference of the
    /// gradient; objectives with a closed form override it.
    virtual Vector hvp(const Vector& w, const Vector& v) const;
    /// Global Lipschitz constant of the gradient; +inf when there is none.
    virtual double lipschitz() const = 0;

    /// Exact grad F(W) = E_U[grad f(W + U)] when a closed form applies under
    /// `dist` at this point, otherwise nullopt.
    virtual std::optional<Vector> population_gradient(const Vector& w, const PerturbationDist& dist) const;
    /// Exact F(W) = E_U[f(W + U)] when a closed form applies.
    virtual std::optional<double> population_value(const Vector& w, const PerturbationDist& dist) const;

protected:
    void check_dim(const Vector& w, const char* what) const;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

/// f(W) = (c/2) ||W||^2.
class IsotropicQuadratic final : public Objective {
public:
    IsotropicQuadratic(double curvature, std::size_t dim);

    std::string name() const override { return "quadratic"; }
    std::size_t dim() const override { return dim_; }
    double curvature() const noexcept { return c_; }
    double value(const Vector& w) const override;
    Vector gradient(const Vector& w) const override;
    Vector hvp(const Vector& w, const Vector& v) const override;
    double lipschitz() const override { return c_; }
    std::optional<Vector> population_gradient(const Vector& w, const PerturbationDist& dist) const override;
    std::optional<double> population_value(const Vector& w, const PerturbationDist& dist) const override;

private:
    double c_;
    std::size_t dim_;
};

/// f(W) = 1/2 W^T Q W for a dense symmetric Q (row-major).
class DenseQuadratic final : public Objective {
public:
    explicit DenseQuadratic(std::vector<double> q, std::size_t dim);

    std::string name() const override { return "quadratic_form"; }
    std::size_t dim() const override { return dim_; }
    double value(const Vector& w) const override;
    Vector gradient(const Vector& w) const override;
    Vector hvp(const Vector& w, const Vector& v) const override;
    /// Max absolute row sum, an upper bound on the spectral norm.
    double lipschitz() const override { return lipschitz_; }
    std::optional<Vector> population_gradient(const Vector& w, const PerturbationDist& dist) const override;
    std::optional<double> population_value(const Vector& w, const PerturbationDist& dist) const override;

private:
    std::vector<double> q_;
    std::size_t dim_;
    double lipschitz_;
};

/// f(W) = sum_i W_i^4. Smooth but without a global gradient Lipschitz
/// constant; used for Taylor-remainder measurements.
class Quartic final : public Objective {
public:
    explicit Quartic(std::size_t dim);

    std::string name() const override { return "quartic"; }
    std::size_t dim() const override { return dim_; }
    double value(const Vector& w) const override;
    Vector gradient(const Vector& w) const override;
    Vector hvp(const Vector& w, const Vector& v) const override;
    double lipschitz() const override;
    std::optional<Vector> population_gradient(const Vector& w, const PerturbationDist& dist) const override;

private:
    std::size_t dim_;
};

ObjectivePtr make_quadratic(double c, std::size_t dim);
/// f(W) = ||W||^2 / (2 kappa).
ObjectivePtr make_scaled_quadratic(double kappa, std::size_t dim);
ObjectivePtr make_quadratic_form(std::vector<double> q, std::size_t dim);
ObjectivePtr make_quartic(std::size_t dim);

// ---------------------------------------------------------------------------
// Piecewise-quadratic lower-bound constructions.

struct PieceValue {
    double value;
    double derivative;
};

/// Even four-branch piece with a C-Lipschitz derivative:
///
///   C a^2 / 4                        |x| <= a
///   -C (|x| - a)^2 / 2 + C a^2 / 4   a <= |x| <= 3a/2
///   C (|x| - 2a)^2 / 2               3a/2 <= |x| <= 2a
///   0                                2a <= |x|
///
/// Exact breakpoints take the left branch.
PieceValue h_piece(double x, double alpha, double c);
/// Second derivative of h_piece (left branch at breakpoints).
double h_piece_curvature(double x, double alpha, double c);

/// Three-branch even piece:
///
///   -C x^2 / 2 + C a^2 / 4   |x| <= a/2
///   C (|x| - a)^2 / 2        a/2 <= |x| <= a
///   0                        a <= |x|
PieceValue g_piece(double x, double alpha, double c);
double g_piece_curvature(double x, double alpha, double c);

struct HardChainSpec {
    double c = 1.0;
    double g = 1.0;
    std::vector<double> alphas;
    std::size_t dim = 0;
};

/// f(W) = <W,e_0>^2 / (2G) + sum_{i<T} h_i(<W, e_{i+1}>), with h_i = h_piece(., alpha_i, C).
class HardChain final : public Objective {
public:
    explicit HardChain(HardChainSpec spec);

    std::string name() const override { return "hard_chain"; }
    std::size_t dim() const override { return spec_.dim; }
    const HardChainSpec& spec() const noexcept { return spec_; }
    std::size_t chain_length() const noexcept { return spec_.alphas.size(); }

    double value(const Vector& w) const override;
    Vector gradient(const Vector& w) const override;
    Vector hvp(const Vector& w, const Vector& v) const override;
    double lipschitz() const override { return spec_.c; }
    /// Closed form when every chain coordinate satisfies |W_{i+1}| + cap_{i+1} <= alpha_i,
    /// i.e. the smoothed piece sits entirely on its flat branch.
    std::optional<Vector> population_gradient(const Vector& w, const PerturbationDist& dist) const override;
    std::optional<double> population_value(const Vector& w, const PerturbationDist& dist) const override;

    /// True when chain coordinate i+1 is on the flat branch, including the
    /// perturbation support.
    bool in_flat_region(const Vector& w, std::size_t i, double cap) const;

private:
    HardChainSpec spec_;
};

ObjectivePtr make_hard_chain(HardChainSpec spec);

/// f(W) = g(<W, e_0>) + sum_{j>=1} (C/2) <W, e_j>^2.
class ChainG final : public Objective {
public:
    ChainG(double c, double alpha, std::size_t dim);

    std::string name() const override { return "chain_g"; }
    std::size_t dim() const override { return dim_; }
    double alpha() const noexcept { return alpha_; }
    double curvature() const noexcept { return c_; }

    double value(const Vector& w) const override;
    Vector gradient(const Vector& w) const override;
    Vector hvp(const Vector& w, const Vector& v) const override;
    double lipschitz() const override { return c_; }
    /// Closed form when |W_0| + cap_0 <= alpha / 2 (concave middle branch).
    std::optional<Vector> population_gradient(const Vector& w, const PerturbationDist& dist) const override;
    std::optional<double> population_value(const Vector& w, const PerturbationDist& dist) const override;

private:
    double c_;
    double alpha_;
    std::size_t dim_;
};

ObjectivePtr make_chain_g(double c, double alpha, std::size_t dim);

/// Convex benchmark f(W) = s * sum_i huber_delta(W_i) with s = G/sqrt(d), so
/// ||grad f|| <= G everywhere and the gradient is (s/delta)-Lipschitz.
class SmoothConvexBench final : public Objective {
public:
    SmoothConvexBench(std::size_t dim, double radius, double gradient_bound, double huber_width);

    std::string name() const override { return "huber_bench"; }
    std::size_t dim() const override { return dim_; }
    double radius() const noexcept { return radius_; }
    double gradient_bound() const noexcept { return gradient_bound_; }
    double huber_width() const noexcept { return delta_; }

    double value(const Vector& w) const override;
    Vector gradient(const Vector& w) const override;
    Vector hvp(const Vector& w, const Vector& v) const override;
    double lipschitz() const override { return slope_ / delta_; }

private:
    std::size_t dim_;
    double radius_;
    double gradient_bound_;
    double delta_;
    double slope_;
};

/// Defaults the Huber width to R / (4 sqrt(d)).
ObjectivePtr make_smooth_convex_bench(std::size_t dim, double radius, double gradient_bound,
                                      std::optional<double> huber_width = std::nullopt);

}  // namespace nso
