#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "nso/objectives.hpp"
#include "nso/perturbation.hpp"
#include "nso/rng.hpp"
#include "nso/vector.hpp"

namespace nso {

// ---------------------------------------------------------------------------
// Hessian diagnostics

struct Estimate {
    double value = 0.0;
    double std_err = 0.0;
};

/// (1/m) sum_j v_j^T H v_j with Rademacher probes; probe j uses rng.child("probe", j).
Estimate hutchinson_trace(const Objective& obj, const Vector& w, std::size_t m, const RngStream& rng);

/// tr H from d basis-vector HVPs.
double exact_trace(const Objective& obj, const Vector& w);
/// <Sigma, H> for the diagonal covariance of `dist`.
double weighted_trace(const Objective& obj, const Vector& w, const PerturbationDist& dist);

struct PowerResult {
    double lambda = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Dominant-magnitude eigenvalue of H(W) by HVP power iteration, stopping when
/// the Rayleigh quotient changes by less than tol (relative).
PowerResult power_lambda1(const Objective& obj, const Vector& w, std::size_t iters, double tol, const RngStream& rng);

// ---------------------------------------------------------------------------
// Taylor gap F - f

struct TaylorOptions {
    /// Subtract 1/2 U^T H U - 1/2 <Sigma, H>, which has mean zero, from every
    /// sample. Leaves the estimator unbiased and removes the second-order noise.
    bool control_variate = false;
};

struct TaylorPoint {
    double sigma = 0.0;
    double measured = 0.0;
    double std_err = 0.0;
    double predicted = 0.0;
};

/// Monte Carlo of 1/2 (f(W+U) + f(W-U)) - f(W) over m symmetric pairs,
/// paired with the prediction 1/2 <Sigma, H(W)>.
TaylorPoint taylor_gap(const Objective& obj, const Vector& w, const PerturbationDist& dist, std::size_t m,
                       const RngStream& rng, const TaylorOptions& options = {});

struct TaylorReport {
    std::vector<TaylorPoint> points;

    /// sum (measured - predicted)^2 / sum predicted^2.
    double relative_rss() const;
    /// Least-squares slope of log|measured - predicted| against log sigma.
    double remainder_slope() const;
};

/// One taylor_gap per sigma. With common_random_numbers every grid point
/// reuses the same stream.
TaylorReport taylor_report(const Objective& obj, const Vector& w, PerturbationKind kind,
                           const std::vector<double>& sigmas, std::size_t m, const RngStream& rng,
                           const TaylorOptions& options = {}, bool common_random_numbers = true);

// ---------------------------------------------------------------------------
// Smoothed objective F(W) = E f(W + U)

struct GradFResult {
    Vector value;
    /// Per-coordinate standard errors (zero when exact).
    Vector std_err;
    bool exact = false;
};

/// Closed form when the objective provides one, otherwise the mean of
/// 1/2 (grad f(W+U) + grad f(W-U)) over m pairs.
GradFResult grad_F(const Objective& obj, const PerturbationDist& dist, const Vector& w, std::size_t m,
                   const RngStream& rng);

struct ValueResult {
    double value = 0.0;
    double std_err = 0.0;
    bool exact = false;
};

ValueResult population_value(const Objective& obj, const PerturbationDist& dist, const Vector& w, std::size_t m,
                             const RngStream& rng);
/// F(a) - F(b) on common perturbations.
ValueResult population_gap(const Objective& obj, const PerturbationDist& dist, const Vector& a, const Vector& b,
                           std::size_t m, const RngStream& rng);

// ---------------------------------------------------------------------------
// Closed-form bounds

struct BoundInputs {
    double c = 1.0;
    double d = 1.0;
    double sigma = 0.0;
    double h = 0.0;
    double k = 1.0;
    double t = 1.0;
    double r = 1.0;
    double g = 1.0;
    double mu = 0.0;
};

/// (sigma^2 + C^2 H) / k.
double variance_term(const BoundInputs& b);
/// sqrt(2 C D^2 (sigma^2 + C^2 H) / (k T)) + 2 C D^2 / T.
double theorem1_rhs(const BoundInputs& b);
/// D sqrt(C sigma^2 / (32 k T)).
double theorem2_rhs(const BoundInputs& b);
/// c D sqrt(C sigma^2 / (k T)).
double momentum_lower_order(const BoundInputs& b, double constant);
/// sqrt(2 D^2 / (C Delta T)) when Delta >= 2 C D^2 / T, otherwise 1/C.
double optimal_eta(const BoundInputs& b);

struct ConvexBound {
    double eta = 0.0;
    double bound = 0.0;
};
/// eta = R / (2 G sqrt(T)); bound R^2/(2 eta T) + eta G^2 / 2 = 1.25 R G / sqrt(T).
ConvexBound convex_bound(double radius, double gradient_bound, double steps);

// ---------------------------------------------------------------------------
// Quadratic dynamics f = (C/2)||W||^2 under noisy (momentum) gradient steps

/// E||grad F(W_t)||^2 for t = 0..T with mu = 0, ||W_0||^2 = 2 D^2 / C and
/// averaged noise of second moment sigma^2 / k:
///   2 C D^2 prod_{j<t} (1 - C eta_j)^2 + (C^2 sigma^2 / k) sum_{i<t} eta_i^2 prod_{i<j<t} (1 - C eta_j)^2.
std::vector<double> quadratic_expected_sq_grad(double c, double d, double sigma, double k,
                                               const std::vector<double>& etas);

/// Same quantity for any mu, from the exact second-moment recursion of the
/// (W, M) state: P <- X P X^T + eta^2 (sigma^2/k) [1 1; 1 1].
std::vector<double> momentum_expected_sq_grad(double c, double d, double sigma, double k, double mu,
                                              const std::vector<double>& etas);

using Mat2 = std::array<double, 4>;
/// X = [1 - C eta, mu; -C eta, mu] acting on (W, M).
Mat2 momentum_transition(double c, double eta, double mu);
Mat2 mat2_mul(const Mat2& a, const Mat2& b);
Mat2 mat2_pow(const Mat2& a, std::size_t p);

/// Per-coordinate states (W_t, M_t), t = 0..T, for a constant step, from
/// s_t = X^t s_0 - eta sum_{i<t} X^{t-1-i} [xi_i; xi_i].
std::vector<std::array<double, 2>> momentum_closed_form(double c, double eta, double mu, double w0,
                                                        const std::vector<double>& xi);

}  // namespace nso
