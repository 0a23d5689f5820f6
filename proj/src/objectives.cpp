#include "nso/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nso {

void Objective::check_dim(const Vector& w, const char* what) const {
    if (w.dim() != dim()) {
        throw std::invalid_argument(name() + "::" + what + ": expected dimension " + std::to_string(dim()) +
                                    ", got " + std::to_string(w.dim()));
    }
}

Vector Objective::hvp(const Vector& w, const Vector& v) const {
    check_dim(w, "hvp");
    check_dim(v, "hvp");
    const double vn = v.norm();
    if (vn == 0.0) return Vector(dim());
    const double h = 1e-5 * std::max(1.0, w.norm()) / vn;
    Vector plus = w;
    plus.axpy(h, v);
    Vector minus = w;
    minus.axpy(-h, v);
    Vector out = gradient(plus) - gradient(minus);
    out *= 1.0 / (2.0 * h);
    return out;
}

std::optional<Vector> Objective::population_gradient(const Vector&, const PerturbationDist&) const {
    return std::nullopt;
}

std::optional<double> Objective::population_value(const Vector&, const PerturbationDist&) const {
    return std::nullopt;
}

namespace {

void check_dist(const Objective& obj, const PerturbationDist& dist) {
    if (dist.dim() != obj.dim()) throw std::invalid_argument(obj.name() + ": perturbation dimension mismatch");
}

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

}  // namespace

// --- IsotropicQuadratic -----------------------------------------------------

IsotropicQuadratic::IsotropicQuadratic(double curvature, std::size_t dim) : c_(curvature), dim_(dim) {
    if (!(curvature > 0.0) || !std::isfinite(curvature))
        throw std::invalid_argument("quadratic: curvature must be finite and > 0");
    if (dim == 0) throw std::invalid_argument("quadratic: dim must be >= 1");
}

double IsotropicQuadratic::value(const Vector& w) const {
    check_dim(w, "value");
    return 0.5 * c_ * w.squared_norm();
}

Vector IsotropicQuadratic::gradient(const Vector& w) const {
    check_dim(w, "gradient");
    return c_ * w;
}

Vector IsotropicQuadratic::hvp(const Vector& w, const Vector& v) const {
    check_dim(w, "hvp");
    check_dim(v, "hvp");
    return c_ * v;
}

std::optional<Vector> IsotropicQuadratic::population_gradient(const Vector& w, const PerturbationDist& dist) const {
    check_dist(*this, dist);
    return gradient(w);
}

std::optional<double> IsotropicQuadratic::population_value(const Vector& w, const PerturbationDist& dist) const {
    check_dist(*this, dist);
    return value(w) + 0.5 * c_ * dist.h_moment();
}

// --- DenseQuadratic ---------------------------------------------------------

DenseQuadratic::DenseQuadratic(std::vector<double> q, std::size_t dim) : q_(std::move(q)), dim_(dim) {
    if (dim == 0 || q_.size() != dim * dim) throw std::invalid_argument("quadratic_form: Q must be dim x dim");
    lipschitz_ = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            if (std::abs(q_[i * dim + j] - q_[j * dim + i]) > 1e-12 * (1.0 + std::abs(q_[i * dim + j])))
                throw std::invalid_argument("quadratic_form: Q must be symmetric");
            row += std::abs(q_[i * dim + j]);
        }
        lipschitz_ = std::max(lipschitz_, row);
    }
}

double DenseQuadratic::value(const Vector& w) const {
    check_dim(w, "value");
    return 0.5 * dot(w, gradient(w));
}

Vector DenseQuadratic::gradient(const Vector& w) const {
    check_dim(w, "gradient");
    Vector g(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) s += q_[i * dim_ + j] * w[j];
        g[i] = s;
    }
    return g;
}

Vector DenseQuadratic::hvp(const Vector& w, const Vector& v) const {
    check_dim(w, "hvp");
    return gradient(v);
}

std::optional<Vector> DenseQuadratic::population_gradient(const Vector& w, const PerturbationDist& dist) const {
    check_dist(*this, dist);
    return gradient(w);
}

std::optional<double> DenseQuadratic::population_value(const Vector& w, const PerturbationDist& dist) const {
    check_dist(*this, dist);
    double trace_term = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) trace_term += q_[i * dim_ + i] * dist.coordinate_second_moment(i);
    return value(w) + 0.5 * trace_term;
}

// --- Quartic ----------------------------------------------------------------

Quartic::Quartic(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("quartic: dim must be >= 1");
}

double Quartic::value(const Vector& w) const {
    check_dim(w, "value");
    double s = 0.0;
    for (double x : w) s += x * x * x * x;
    return s;
}

Vector Quartic::gradient(const Vector& w) const {
    check_dim(w, "gradient");
    Vector g(dim_);
    for (std::size_t i = 0; i < dim_; ++i) g[i] = 4.0 * w[i] * w[i] * w[i];
    return g;
}

Vector Quartic::hvp(const Vector& w, const Vector& v) const {
    check_dim(w, "hvp");
    check_dim(v, "hvp");
    Vector out(dim_);
    for (std::size_t i = 0; i < dim_; ++i) out[i] = 12.0 * w[i] * w[i] * v[i];
    return out;
}

double Quartic::lipschitz() const { return std::numeric_limits<double>::infinity(); }

std::optional<Vector> Quartic::population_gradient(const Vector& w, const PerturbationDist& dist) const {
    check_dim(w, "population_gradient");
    check_dist(*this, dist);
    // Odd moments of a symmetric law vanish: E(w+u)^3 = w^3 + 3 w E[u^2].
    Vector g(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
        g[i] = 4.0 * (w[i] * w[i] * w[i] + 3.0 * w[i] * dist.coordinate_second_moment(i));
    return g;
}

ObjectivePtr make_quadratic(double c, std::size_t dim) { return std::make_shared<IsotropicQuadratic>(c, dim); }

ObjectivePtr make_scaled_quadratic(double kappa, std::size_t dim) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw std::invalid_argument("scaled quadratic: kappa must be > 0");
    return std::make_shared<IsotropicQuadratic>(1.0 / kappa, dim);
}

ObjectivePtr make_quadratic_form(std::vector<double> q, std::size_t dim) {
    return std::make_shared<DenseQuadratic>(std::move(q), dim);
}

ObjectivePtr make_quartic(std::size_t dim) { return std::make_shared<Quartic>(dim); }

// --- piecewise pieces -------------------------------------------------------

PieceValue h_piece(double x, double alpha, double c) {
    const double ax = std::abs(x);
    const double top = 0.25 * c * alpha * alpha;
    if (ax <= alpha) return {top, 0.0};
    if (ax <= 1.5 * alpha) {
        const double dx = ax - alpha;
        return {-0.5 * c * dx * dx + top, -c * dx * sign_of(x)};
    }
    if (ax <= 2.0 * alpha) {
        const double dx = ax - 2.0 * alpha;
        return {0.5 * c * dx * dx, c * dx * sign_of(x)};
    }
    return {0.0, 0.0};
}

double h_piece_curvature(double x, double alpha, double c) {
    const double ax = std::abs(x);
    if (ax <= alpha) return 0.0;
    if (ax <= 1.5 * alpha) return -c;
    if (ax <= 2.0 * alpha) return c;
    return 0.0;
}

PieceValue g_piece(double x, double alpha, double c) {
    const double ax = std::abs(x);
    if (ax <= 0.5 * alpha) return {-0.5 * c * x * x + 0.25 * c * alpha * alpha, -c * x};
    if (ax <= alpha) {
        const double dx = ax - alpha;
        return {0.5 * c * dx * dx, c * dx * sign_of(x)};
    }
    return {0.0, 0.0};
}

double g_piece_curvature(double x, double alpha, double c) {
    const double ax = std::abs(x);
    if (ax <= 0.5 * alpha) return -c;
    if (ax <= alpha) return c;
    return 0.0;
}

// --- HardChain --------------------------------------------------------------

HardChain::HardChain(HardChainSpec spec) : spec_(std::move(spec)) {
    if (!(spec_.c > 0.0)) throw std::invalid_argument("hard_chain: C must be > 0");
    if (!(spec_.g > 0.0)) throw std::invalid_argument("hard_chain: G must be > 0");
    if (spec_.g < 1.0 / spec_.c) throw std::invalid_argument("hard_chain: G must be >= 1/C");
    if (spec_.alphas.empty()) throw std::invalid_argument("hard_chain: need at least one piece");
    for (double a : spec_.alphas)
        if (!(a > 0.0)) throw std::invalid_argument("hard_chain: alphas must be > 0");
    if (spec_.dim < spec_.alphas.size() + 1)
        throw std::invalid_argument("hard_chain: dimension must be at least T + 1 (got d = " +
                                    std::to_string(spec_.dim) + ", T = " + std::to_string(spec_.alphas.size()) +
                                    ")");
}

double HardChain::value(const Vector& w) const {
    check_dim(w, "value");
    double s = w[0] * w[0] / (2.0 * spec_.g);
    for (std::size_t i = 0; i < spec_.alphas.size(); ++i) s += h_piece(w[i + 1], spec_.alphas[i], spec_.c).value;
    return s;
}

Vector HardChain::gradient(const Vector& w) const {
    check_dim(w, "gradient");
    Vector g(spec_.dim);
    g[0] = w[0] / spec_.g;
    for (std::size_t i = 0; i < spec_.alphas.size(); ++i)
        g[i + 1] = h_piece(w[i + 1], spec_.alphas[i], spec_.c).derivative;
    return g;
}

Vector HardChain::hvp(const Vector& w, const Vector& v) const {
    check_dim(w, "hvp");
    check_dim(v, "hvp");
    Vector out(spec_.dim);
    out[0] = v[0] / spec_.g;
    for (std::size_t i = 0; i < spec_.alphas.size(); ++i)
        out[i + 1] = h_piece_curvature(w[i + 1], spec_.alphas[i], spec_.c) * v[i + 1];
    return out;
}

bool HardChain::in_flat_region(const Vector& w, std::size_t i, double cap) const {
    return std::abs(w[i + 1]) + cap <= spec_.alphas[i];
}

std::optional<Vector> HardChain::population_gradient(const Vector& w, const PerturbationDist& dist) const {
    check_dim(w, "population_gradient");
    check_dist(*this, dist);
    Vector g(spec_.dim);
    g[0] = w[0] / spec_.g;
    for (std::size_t i = 0; i < spec_.alphas.size(); ++i)
        if (!in_flat_region(w, i, dist.support_bound(i + 1))) return std::nullopt;
    return g;
}

std::optional<double> HardChain::population_value(const Vector& w, const PerturbationDist& dist) const {
    check_dim(w, "population_value");
    check_dist(*this, dist);
    double s = (w[0] * w[0] + dist.coordinate_second_moment(0)) / (2.0 * spec_.g);
    for (std::size_t i = 0; i < spec_.alphas.size(); ++i) {
        if (!in_flat_region(w, i, dist.support_bound(i + 1))) return std::nullopt;
        s += 0.25 * spec_.c * spec_.alphas[i] * spec_.alphas[i];
    }
    return s;
}

ObjectivePtr make_hard_chain(HardChainSpec spec) { return std::make_shared<HardChain>(std::move(spec)); }

// --- ChainG -----------------------------------------------------------------

ChainG::ChainG(double c, double alpha, std::size_t dim) : c_(c), alpha_(alpha), dim_(dim) {
    if (!(c > 0.0)) throw std::invalid_argument("chain_g: C must be > 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("chain_g: alpha must be > 0");
    if (dim < 2) throw std::invalid_argument("chain_g: dim must be >= 2");
}

double ChainG::value(const Vector& w) const {
    check_dim(w, "value");
    double s = g_piece(w[0], alpha_, c_).value;
    for (std::size_t j = 1; j < dim_; ++j) s += 0.5 * c_ * w[j] * w[j];
    return s;
}

Vector ChainG::gradient(const Vector& w) const {
    check_dim(w, "gradient");
    Vector g(dim_);
    g[0] = g_piece(w[0], alpha_, c_).derivative;
    for (std::size_t j = 1; j < dim_; ++j) g[j] = c_ * w[j];
    return g;
}

Vector ChainG::hvp(const Vector& w, const Vector& v) const {
    check_dim(w, "hvp");
    check_dim(v, "hvp");
    Vector out(dim_);
    out[0] = g_piece_curvature(w[0], alpha_, c_) * v[0];
    for (std::size_t j = 1; j < dim_; ++j) out[j] = c_ * v[j];
    return out;
}

std::optional<Vector> ChainG::population_gradient(const Vector& w, const PerturbationDist& dist) const {
    check_dim(w, "population_gradient");
    check_dist(*this, dist);
    if (std::abs(w[0]) + dist.support_bound(0) > 0.5 * alpha_) return std::nullopt;
    Vector g(dim_);
    g[0] = -c_ * w[0];
    for (std::size_t j = 1; j < dim_; ++j) g[j] = c_ * w[j];
    return g;
}

std::optional<double> ChainG::population_value(const Vector& w, const PerturbationDist& dist) const {
    check_dim(w, "population_value");
    check_dist(*this, dist);
    if (std::abs(w[0]) + dist.support_bound(0) > 0.5 * alpha_) return std::nullopt;
    double s = -0.5 * c_ * (w[0] * w[0] + dist.coordinate_second_moment(0)) + 0.25 * c_ * alpha_ * alpha_;
    for (std::size_t j = 1; j < dim_; ++j) s += 0.5 * c_ * (w[j] * w[j] + dist.coordinate_second_moment(j));
    return s;
}

ObjectivePtr make_chain_g(double c, double alpha, std::size_t dim) { return std::make_shared<ChainG>(c, alpha, dim); }

// --- SmoothConvexBench ------------------------------------------------------

SmoothConvexBench::SmoothConvexBench(std::size_t dim, double radius, double gradient_bound, double huber_width)
    : dim_(dim), radius_(radius), gradient_bound_(gradient_bound), delta_(huber_width) {
    if (dim == 0) throw std::invalid_argument("huber_bench: dim must be >= 1");
    if (!(radius > 0.0) || !(gradient_bound > 0.0) || !(huber_width > 0.0))
        throw std::invalid_argument("huber_bench: radius, gradient bound and width must be > 0");
    slope_ = gradient_bound / std::sqrt(static_cast<double>(dim));
}

double SmoothConvexBench::value(const Vector& w) const {
    check_dim(w, "value");
    double s = 0.0;
    for (double x : w) {
        const double ax = std::abs(x);
        s += ax <= delta_ ? 0.5 * x * x / delta_ : ax - 0.5 * delta_;
    }
    return slope_ * s;
}

Vector SmoothConvexBench::gradient(const Vector& w) const {
    check_dim(w, "gradient");
    Vector g(dim_);
    for (std::size_t i = 0; i < dim_; ++i) g[i] = slope_ * std::clamp(w[i] / delta_, -1.0, 1.0);
    return g;
}

Vector SmoothConvexBench::hvp(const Vector& w, const Vector& v) const {
    check_dim(w, "hvp");
    check_dim(v, "hvp");
    Vector out(dim_);
    for (std::size_t i = 0; i < dim_; ++i) out[i] = std::abs(w[i]) <= delta_ ? slope_ / delta_ * v[i] : 0.0;
    return out;
}

ObjectivePtr make_smooth_convex_bench(std::size_t dim, double radius, double gradient_bound,
                                      std::optional<double> huber_width) {
    const double width = huber_width.value_or(radius / (4.0 * std::sqrt(static_cast<double>(dim))));
    return std::make_shared<SmoothConvexBench>(dim, radius, gradient_bound, width);
}

}  // namespace nso
