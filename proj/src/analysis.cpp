#include "nso/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nso/kernels.hpp"

namespace nso {

namespace {

Estimate mean_and_se(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    double s = 0.0;
    for (double x : xs) s += x;
    const double mu = s / n;
    if (xs.size() < 2) return {mu, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - mu) * (x - mu);
    return {mu, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

Estimate hutchinson_trace(const Objective& obj, const Vector& w, std::size_t m, const RngStream& rng) {
    if (m < 1) throw std::invalid_argument("hutchinson_trace: m must be >= 1");
    std::vector<double> samples(m);
    kernels::parallel::for_each_index(m, [&](std::size_t j) {
        RngStream probe_rng = rng.child("probe", j);
        Vector v(obj.dim());
        for (double& x : v) x = probe_rng.rademacher();
        samples[j] = dot(v, obj.hvp(w, v));
    });
    return mean_and_se(samples);
}

double exact_trace(const Objective& obj, const Vector& w) {
    const std::size_t d = obj.dim();
    std::vector<double> diag(d);
    kernels::parallel::for_each_index(d, [&](std::size_t i) { diag[i] = obj.hvp(w, Vector::basis(d, i))[i]; });
    double s = 0.0;
    for (double x : diag) s += x;
    return s;
}

double weighted_trace(const Objective& obj, const Vector& w, const PerturbationDist& dist) {
    const std::size_t d = obj.dim();
    if (dist.dim() != d) throw std::invalid_argument("weighted_trace: dimension mismatch");
    std::vector<double> diag(d);
    kernels::parallel::for_each_index(d, [&](std::size_t i) {
        diag[i] = dist.coordinate_second_moment(i) * obj.hvp(w, Vector::basis(d, i))[i];
    });
    double s = 0.0;
    for (double x : diag) s += x;
    return s;
}

PowerResult power_lambda1(const Objective& obj, const Vector& w, std::size_t iters, double tol, const RngStream& rng) {
    if (iters < 1) throw std::invalid_argument("power_lambda1: iters must be >= 1");
    RngStream start = rng.child("power", 0);
    Vector v(obj.dim());
    for (double& x : v) x = start.normal();
    v *= 1.0 / v.norm();
    PowerResult out;
    double previous = 0.0;
    for (std::size_t it = 1; it <= iters; ++it) {
        Vector hv = obj.hvp(w, v);
        const double rayleigh = dot(v, hv);
        const double norm = hv.norm();
        out.lambda = rayleigh;
        out.iterations = it;
        if (norm == 0.0) {
            out.converged = true;
            return out;
        }
        if (it > 1 && std::abs(rayleigh - previous) <= tol * std::max(std::abs(rayleigh), 1e-300)) {
            out.converged = true;
            return out;
        }
        previous = rayleigh;
        v = std::move(hv);
        v *= 1.0 / norm;
    }
    return out;
}

TaylorPoint taylor_gap(const Objective& obj, const Vector& w, const PerturbationDist& dist, std::size_t m,
                       const RngStream& rng, const TaylorOptions& options) {
    if (m < 1) throw std::invalid_argument("taylor_gap: m must be >= 1");
    if (dist.dim() != obj.dim()) throw std::invalid_argument("taylor_gap: dimension mismatch");
    TaylorPoint pt;
    pt.sigma = dist.sigma();
    const double half_trace = 0.5 * weighted_trace(obj, w, dist);
    pt.predicted = half_trace;
    const double f0 = obj.value(w);
    std::vector<double> samples(m);
    kernels::parallel::for_each_index(m, [&](std::size_t j) {
        RngStream u_rng = rng.child("taylor_pair", j);
        const Vector u = dist.sample(u_rng);
        double s = 0.5 * (obj.value(w + u) + obj.value(w - u)) - f0;
        if (options.control_variate) s -= 0.5 * dot(u, obj.hvp(w, u)) - half_trace;
        samples[j] = s;
    });
    const auto est = mean_and_se(samples);
    pt.measured = est.value;
    pt.std_err = est.std_err;
    return pt;
}

double TaylorReport::relative_rss() const {
    double num = 0.0;
    double den = 0.0;
    for (const auto& p : points) {
        num += (p.measured - p.predicted) * (p.measured - p.predicted);
        den += p.predicted * p.predicted;
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

double TaylorReport::remainder_slope() const {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& p : points) {
        const double r = std::abs(p.measured - p.predicted);
        if (p.sigma > 0.0 && r > 0.0) {
            xs.push_back(std::log(p.sigma));
            ys.push_back(std::log(r));
        }
    }
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

TaylorReport taylor_report(const Objective& obj, const Vector& w, PerturbationKind kind,
                           const std::vector<double>& sigmas, std::size_t m, const RngStream& rng,
                           const TaylorOptions& options, bool common_random_numbers) {
    if (sigmas.empty()) throw std::invalid_argument("taylor_report: sigma grid must be non-empty");
    TaylorReport report;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        const PerturbationDist dist(kind, sigmas[i], obj.dim());
        const RngStream cell = common_random_numbers ? rng : rng.child("sigma", i);
        report.points.push_back(taylor_gap(obj, w, dist, m, cell, options));
    }
    return report;
}

GradFResult grad_F(const Objective& obj, const PerturbationDist& dist, const Vector& w, std::size_t m,
                   const RngStream& rng) {
    const std::size_t d = obj.dim();
    if (auto exact = obj.population_gradient(w, dist)) return {std::move(*exact), Vector(d), true};
    if (m < 1) throw std::invalid_argument("grad_F: m must be >= 1");
    std::vector<Vector> samples(m);
    kernels::parallel::for_each_index(m, [&](std::size_t j) {
        RngStream u_rng = rng.child("grad_F", j);
        const Vector u = dist.sample(u_rng);
        Vector g = obj.gradient(w + u);
        g += obj.gradient(w - u);
        g *= 0.5;
        samples[j] = std::move(g);
    });
    GradFResult out{Vector(d), Vector(d), false};
    for (const auto& s : samples) out.value += s;
    out.value *= 1.0 / static_cast<double>(m);
    if (m > 1) {
        for (const auto& s : samples)
            for (std::size_t i = 0; i < d; ++i) out.std_err[i] += (s[i] - out.value[i]) * (s[i] - out.value[i]);
        for (double& x : out.std_err) x = std::sqrt(x / static_cast<double>(m - 1) / static_cast<double>(m));
    }
    return out;
}

ValueResult population_value(const Objective& obj, const PerturbationDist& dist, const Vector& w, std::size_t m,
                             const RngStream& rng) {
    if (auto exact = obj.population_value(w, dist)) return {*exact, 0.0, true};
    if (m < 1) throw std::invalid_argument("population_value: m must be >= 1");
    std::vector<double> samples(m);
    kernels::parallel::for_each_index(m, [&](std::size_t j) {
        RngStream u_rng = rng.child("value", j);
        const Vector u = dist.sample(u_rng);
        samples[j] = 0.5 * (obj.value(w + u) + obj.value(w - u));
    });
    const auto est = mean_and_se(samples);
    return {est.value, est.std_err, false};
}

ValueResult population_gap(const Objective& obj, const PerturbationDist& dist, const Vector& a, const Vector& b,
                           std::size_t m, const RngStream& rng) {
    const auto fa = obj.population_value(a, dist);
    const auto fb = obj.population_value(b, dist);
    if (fa && fb) return {*fa - *fb, 0.0, true};
    if (m < 1) throw std::invalid_argument("population_gap: m must be >= 1");
    std::vector<double> samples(m);
    kernels::parallel::for_each_index(m, [&](std::size_t j) {
        RngStream u_rng = rng.child("value", j);
        const Vector u = dist.sample(u_rng);
        samples[j] = 0.5 * (obj.value(a + u) + obj.value(a - u)) - 0.5 * (obj.value(b + u) + obj.value(b - u));
    });
    const auto est = mean_and_se(samples);
    return {est.value, est.std_err, false};
}

// --- bounds -----------------------------------------------------------------

namespace {

void require_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite and > 0");
}

void require_nonnegative(double x, const char* what) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite and >= 0");
}

}  // namespace

double variance_term(const BoundInputs& b) {
    require_positive(b.c, "C");
    require_positive(b.k, "k");
    require_nonnegative(b.sigma, "sigma");
    require_nonnegative(b.h, "H");
    return (b.sigma * b.sigma + b.c * b.c * b.h) / b.k;
}

double theorem1_rhs(const BoundInputs& b) {
    require_positive(b.t, "T");
    require_nonnegative(b.d, "D");
    const double cd2 = b.c * b.d * b.d;
    return std::sqrt(2.0 * cd2 * variance_term(b) / b.t) + 2.0 * cd2 / b.t;
}

double theorem2_rhs(const BoundInputs& b) {
    require_positive(b.c, "C");
    require_positive(b.k, "k");
    require_positive(b.t, "T");
    require_nonnegative(b.d, "D");
    require_nonnegative(b.sigma, "sigma");
    return b.d * std::sqrt(b.c * b.sigma * b.sigma / (32.0 * b.k * b.t));
}

double momentum_lower_order(const BoundInputs& b, double constant) {
    return constant * std::sqrt(32.0) * theorem2_rhs(b);
}

double optimal_eta(const BoundInputs& b) {
    require_positive(b.t, "T");
    require_positive(b.d, "D");
    const double delta = variance_term(b);
    const double cap = 1.0 / b.c;
    if (delta > 0.0 && delta >= 2.0 * b.c * b.d * b.d / b.t)
        return std::min(cap, std::sqrt(2.0 * b.d * b.d / (b.c * delta * b.t)));
    return cap;
}

ConvexBound convex_bound(double radius, double gradient_bound, double steps) {
    require_nonnegative(radius, "R");
    require_positive(gradient_bound, "G");
    require_positive(steps, "T");
    const double root = std::sqrt(steps);
    const double eta = radius / (2.0 * gradient_bound * root);
    if (radius == 0.0) return {0.0, 0.0};
    return {eta, radius * radius / (2.0 * eta * steps) + 0.5 * eta * gradient_bound * gradient_bound};
}

std::vector<double> quadratic_expected_sq_grad(double c, double d, double sigma, double k,
                                               const std::vector<double>& etas) {
    std::vector<double> out;
    out.reserve(etas.size() + 1);
    // Running forms of the two products, updated one factor at a time.
    double signal = 2.0 * c * d * d;
    double noise = 0.0;
    const double noise_scale = c * c * sigma * sigma / k;
    out.push_back(signal + noise);
    for (double eta : etas) {
        const double contraction = (1.0 - c * eta) * (1.0 - c * eta);
        signal *= contraction;
        noise = noise * contraction + noise_scale * eta * eta;
        out.push_back(signal + noise);
    }
    return out;
}

std::vector<double> momentum_expected_sq_grad(double c, double d, double sigma, double k, double mu,
                                              const std::vector<double>& etas) {
    // P = E[s s^T] summed over coordinates, s = (W, M).
    double pww = 2.0 * d * d / c;
    double pwm = 0.0;
    double pmm = 0.0;
    const double q = sigma * sigma / k;
    std::vector<double> out;
    out.reserve(etas.size() + 1);
    out.push_back(c * c * pww);
    for (double eta : etas) {
        const Mat2 x = momentum_transition(c, eta, mu);
        const double a = x[0], b = x[1], e = x[2], f = x[3];
        const double nww = a * a * pww + 2.0 * a * b * pwm + b * b * pmm;
        const double nwm = a * e * pww + (a * f + b * e) * pwm + b * f * pmm;
        const double nmm = e * e * pww + 2.0 * e * f * pwm + f * f * pmm;
        const double n2 = eta * eta * q;
        pww = nww + n2;
        pwm = nwm + n2;
        pmm = nmm + n2;
        out.push_back(c * c * pww);
    }
    return out;
}

Mat2 momentum_transition(double c, double eta, double mu) { return {1.0 - c * eta, mu, -c * eta, mu}; }

Mat2 mat2_mul(const Mat2& a, const Mat2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3]};
}

Mat2 mat2_pow(const Mat2& a, std::size_t p) {
    Mat2 result{1.0, 0.0, 0.0, 1.0};
    Mat2 base = a;
    while (p > 0) {
        if (p & 1u) result = mat2_mul(result, base);
        base = mat2_mul(base, base);
        p >>= 1u;
    }
    return result;
}

std::vector<std::array<double, 2>> momentum_closed_form(double c, double eta, double mu, double w0,
                                                        const std::vector<double>& xi) {
    const Mat2 x = momentum_transition(c, eta, mu);
    const std::size_t steps = xi.size();
    std::vector<std::array<double, 2>> out(steps + 1);
    for (std::size_t t = 0; t <= steps; ++t) {
        const Mat2 p = mat2_pow(x, t);
        double w = p[0] * w0;
        double m = p[2] * w0;
        for (std::size_t i = 0; i < t; ++i) {
            if (xi[i] == 0.0) continue;
            const Mat2 q = mat2_pow(x, t - 1 - i);
            w -= eta * xi[i] * (q[0] + q[1]);
            m -= eta * xi[i] * (q[2] + q[3]);
        }
        out[t] = {w, m};
    }
    return out;
}

}  // namespace nso
