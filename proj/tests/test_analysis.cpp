#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "nso/analysis.hpp"
#include "nso/optimizers.hpp"
#include "nso/sensing.hpp"

using namespace nso;

namespace {

ObjectivePtr diag123() { return make_quadratic_form({1, 0, 0, 0, 2, 0, 0, 0, 3}, 3); }

BoundInputs inputs(double c, double d, double sigma, double h, double k, double t) {
    BoundInputs b;
    b.c = c;
    b.d = d;
    b.sigma = sigma;
    b.h = h;
    b.k = k;
    b.t = t;
    return b;
}

}  // namespace

TEST(Hutchinson, ConstantHessians) {
    const auto q = hutchinson_trace(*make_quadratic(2.0, 5), Vector(5), 50, RngStream(1, 0));
    EXPECT_DOUBLE_EQ(q.value, 10.0);
    EXPECT_DOUBLE_EQ(q.std_err, 0.0);
    // Rademacher probes make v^T D v = tr D for any diagonal D.
    const auto d = hutchinson_trace(*diag123(), Vector(3), 50, RngStream(1, 1));
    EXPECT_NEAR(d.value, 6.0, 3.0 / std::sqrt(50.0));
}

TEST(Hutchinson, SensingAgreesWithBasisTrace) {
    auto ms = make_matrix_sensing(5, 2, 40, RngStream(2, 0));
    const Vector u = ms.instance.padded_truth();
    const double exact = exact_trace(*ms.objective, u);
    const auto est = hutchinson_trace(*ms.objective, u, 400, RngStream(2, 1));
    EXPECT_LE(std::abs(est.value - exact), 2.0 * est.std_err);
}

TEST(Hutchinson, CoverageOnKnownTrace) {
    std::vector<double> q(36);
    RngStream rng(3, 0);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j <= i; ++j) q[i * 6 + j] = q[j * 6 + i] = rng.normal();
    const auto f = make_quadratic_form(q, 6);
    double truth = 0.0;
    for (std::size_t i = 0; i < 6; ++i) truth += q[i * 6 + i];
    int covered = 0;
    for (int r = 0; r < 100; ++r) {
        const auto e = hutchinson_trace(*f, Vector(6), 200, derive_stream(3, "hutchinson", r));
        covered += std::abs(e.value - truth) <= 4.0 * e.std_err;
    }
    EXPECT_GE(covered, 95);
}

TEST(PowerIteration, SimpleSpectra) {
    const auto a = power_lambda1(*make_quadratic(3.0, 4), Vector(4), 100, 1e-12, RngStream(4, 0));
    EXPECT_NEAR(a.lambda, 3.0, 1e-8);
    EXPECT_TRUE(a.converged);
    const auto b = power_lambda1(*diag123(), Vector(3), 2000, 1e-14, RngStream(4, 1));
    EXPECT_NEAR(b.lambda, 3.0, 1e-6);
}

TEST(PowerIteration, MatchesDenseEigensolver) {
    RngStream rng(5, 0);
    Eigen::MatrixXd m(10, 10);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = rng.normal();
    std::vector<double> q(100);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) q[i * 10 + j] = m(i, j);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const auto& ev = es.eigenvalues();
    const double dominant = std::abs(ev(0)) > std::abs(ev(9)) ? ev(0) : ev(9);
    const auto r = power_lambda1(*make_quadratic_form(q, 10), Vector(10), 100000, 1e-15, RngStream(5, 1));
    EXPECT_NEAR(r.lambda, dominant, 1e-6 * std::abs(dominant));
}

TEST(PowerIteration, FlagsNonConvergence) {
    const auto r = power_lambda1(*diag123(), Vector(3), 2, 1e-15, RngStream(6, 0));
    EXPECT_FALSE(r.converged);
}

TEST(Taylor, QuadraticGapIsExact) {
    const auto f = make_quadratic(1.0, 3);
    const auto p = taylor_gap(*f, Vector{0.3, -1.0, 2.0}, PerturbationDist::gaussian(0.5, 3), 1000, RngStream(7, 0));
    EXPECT_NEAR(p.predicted, 0.375, 1e-15);
    EXPECT_NEAR(p.measured, 0.375, 0.375 * 0.2);
    const auto z = taylor_gap(*f, Vector{0.3, -1.0, 2.0}, PerturbationDist::gaussian(0.0, 3), 1000, RngStream(7, 1));
    EXPECT_EQ(z.measured, 0.0);
    EXPECT_EQ(z.predicted, 0.0);
}

TEST(Taylor, QuadraticControlVariateRemovesAllNoise) {
    const auto f = make_quadratic(1.0, 3);
    TaylorOptions opts;
    opts.control_variate = true;
    const auto p =
        taylor_gap(*f, Vector{0.3, -1.0, 2.0}, PerturbationDist::gaussian(0.5, 3), 1000, RngStream(7, 2), opts);
    EXPECT_NEAR(p.measured, 0.375, 1e-12);
    EXPECT_LE(p.std_err, 1e-12);
}

TEST(Taylor, QuarticGapMatchesGaussianMoments) {
    const double s = 0.1;
    const auto p = taylor_gap(*make_quartic(2), Vector{1.0, 1.0}, PerturbationDist::gaussian(s, 2), 100000,
                              RngStream(8, 0));
    // Per coordinate 1/2((1+u)^4 + (1-u)^4) - 1 = 6u^2 + u^4, mean 6 s^2 + 3 s^4.
    const double expect = 2.0 * (6.0 * s * s + 3.0 * s * s * s * s);
    EXPECT_LE(std::abs(p.measured - expect), 3.0 * p.std_err);
    EXPECT_NEAR(p.predicted, 12.0 * s * s, 1e-14);
}

TEST(Taylor, QuarticReportRssAndSlope) {
    std::vector<double> sigmas;
    for (int i = 0; i <= 10; ++i) sigmas.push_back(0.02 + 0.018 * i);
    TaylorOptions opts;
    opts.control_variate = true;
    const auto rep = taylor_report(*make_quartic(10), Vector(10, 1.0), PerturbationKind::IsotropicGaussian, sigmas,
                                   100000, RngStream(9, 0), opts);
    EXPECT_GE(rep.relative_rss(), 0.0);
    EXPECT_LE(rep.relative_rss(), 0.03);
    EXPECT_GE(rep.remainder_slope(), 2.5);
}

TEST(GradF, QuadraticIsExact) {
    const auto f = make_quadratic(2.0, 3);
    const Vector w{0.5, -1.0, 0.25};
    const auto g = grad_F(*f, PerturbationDist::gaussian(0.7, 3), w, 10, RngStream(10, 0));
    EXPECT_TRUE(g.exact);
    EXPECT_EQ(g.value, f->gradient(w));
}

TEST(GradF, QuarticAtOriginIsZero) {
    const auto g = grad_F(*make_quartic(1), PerturbationDist::gaussian(0.3, 1), Vector{0.0}, 1000, RngStream(11, 0));
    EXPECT_LE(std::abs(g.value[0]), 3.0 * g.std_err[0] + 1e-15);
}

TEST(GradF, HardChainFlatRegionMatchesMonteCarlo) {
    HardChainSpec spec;
    spec.c = 1.0;
    spec.g = 2.0;
    spec.alphas = {1.0, 1.0, 1.0};
    spec.dim = 4;
    const auto f = make_hard_chain(spec);
    const PerturbationDist dist(0.2, {0.3, 0.3, 0.3, 0.3});
    const Vector w{0.8, 0.1, -0.2, 0.3};
    const auto g = grad_F(*f, dist, w, 10, RngStream(12, 0));
    ASSERT_TRUE(g.exact);
    EXPECT_NEAR(g.value.norm(), 0.8 / 2.0, 1e-15);
    // Independent symmetric-pair Monte Carlo of grad f(W +- U).
    RngStream rng(12, 1);
    const int m = 20000;
    Vector mean(4);
    Vector sq(4);
    for (int i = 0; i < m; ++i) {
        const Vector u = dist.sample(rng);
        Vector e = f->gradient(w + u) + f->gradient(w - u);
        e *= 0.5;
        mean += e;
        for (std::size_t j = 0; j < 4; ++j) sq[j] += e[j] * e[j];
    }
    mean *= 1.0 / m;
    for (std::size_t j = 0; j < 4; ++j) {
        const double se = std::sqrt(std::max(0.0, sq[j] / m - mean[j] * mean[j]) / m);
        EXPECT_LE(std::abs(mean[j] - g.value[j]), 4.0 * se + 1e-14);
    }
}

TEST(Bounds, Theorem1) {
    EXPECT_NEAR(theorem1_rhs(inputs(1, 1, 1, 0, 1, 8)), 0.75, 1e-15);
    EXPECT_NEAR(theorem1_rhs(inputs(1, 1, 0, 0.5, 1, 8)), theorem1_rhs(inputs(1, 1, 0, 2.0, 4, 8)), 1e-15);
    double prev = theorem1_rhs(inputs(2, 1.5, 0.7, 0.3, 2, 1));
    for (double t = 2; t <= 1e6; t *= 2) {
        const double cur = theorem1_rhs(inputs(2, 1.5, 0.7, 0.3, 2, t));
        EXPECT_LT(cur, prev);
        prev = cur;
    }
    EXPECT_LT(prev, 1e-2);
}

TEST(Bounds, Theorem2) {
    EXPECT_NEAR(theorem2_rhs(inputs(1, 1, 1, 0, 1, 32)), 0.03125, 1e-15);
    EXPECT_NEAR(theorem2_rhs(inputs(1, 1, 1, 0, 1, 128)), 0.03125 / 2.0, 1e-15);
    EXPECT_NEAR(theorem2_rhs(inputs(1, 1, 1, 0, 2, 16)), theorem2_rhs(inputs(1, 1, 1, 0, 1, 32)), 1e-15);
    EXPECT_NEAR(momentum_lower_order(inputs(1, 1, 1, 0, 1, 32), 1.0 / std::sqrt(32.0)), 0.03125, 1e-15);
}

TEST(Bounds, OptimalEta) {
    // Delta = (sigma^2 + C^2 H) / k.
    EXPECT_NEAR(optimal_eta(inputs(1, 1, std::sqrt(2.0), 0, 1, 1)), 1.0, 1e-15);
    EXPECT_NEAR(optimal_eta(inputs(1, 1, std::sqrt(8.0), 0, 1, 4)), 0.25, 1e-15);
    EXPECT_DOUBLE_EQ(optimal_eta(inputs(2, 1, 0.1, 0, 1, 4)), 0.5);
    for (double t : {1.0, 10.0, 1e3}) EXPECT_LE(optimal_eta(inputs(3, 1, 1, 0.2, 1, t)), 1.0 / 3.0);
}

TEST(Bounds, Convex) {
    const auto b = convex_bound(1.0, 1.0, 4.0);
    EXPECT_NEAR(b.eta, 0.25, 1e-15);
    EXPECT_NEAR(b.bound, 0.625, 1e-15);
    // Independent evaluation of R^2/(2 eta T) + eta G^2 / 2.
    EXPECT_NEAR(b.bound, 1.0 / (2.0 * b.eta * 4.0) + b.eta / 2.0, 1e-15);
    EXPECT_NEAR(convex_bound(1.0, 1.0, 16.0).bound, 0.3125, 1e-15);
    EXPECT_EQ(convex_bound(0.0, 1.0, 4.0).bound, 0.0);
}

TEST(QuadraticDynamics, ClosedFormMatchesSimulation) {
    const double c = 1.0;
    const double dd = 1.0;
    const double sigma = 0.5;
    const std::size_t dim = 4;
    const std::size_t k = 2;
    const std::vector<double> etas(12, 0.3);
    const auto expect = quadratic_expected_sq_grad(c, dd, sigma, static_cast<double>(k), etas);
    Vector w0(dim, std::sqrt(2.0 * dd * dd / c / static_cast<double>(dim)));
    const int reps = 4000;
    std::vector<double> mean(etas.size() + 1), sq(etas.size() + 1);
    for (int r = 0; r < reps; ++r) {
        GradOracle o(make_quadratic(c, dim), NoiseModel::isotropic(sigma), derive_stream(13, "oracle", r));
        RngStream pr = derive_stream(13, "perturb", r);
        const auto t = run_nso(o, PerturbationDist::gaussian(0.1, dim), w0, StepSchedule::explicit_steps(etas), k,
                               etas.size(), std::nullopt, pr);
        for (std::size_t i = 0; i <= etas.size(); ++i) {
            const double g2 = c * c * t.iterates[i].squared_norm();
            mean[i] += g2;
            sq[i] += g2 * g2;
        }
    }
    for (std::size_t i = 0; i <= etas.size(); ++i) {
        const double m = mean[i] / reps;
        const double se = std::sqrt(std::max(0.0, sq[i] / reps - m * m) / reps);
        EXPECT_LE(std::abs(m - expect[i]), 4.0 * se + 1e-12) << "t=" << i;
    }
    const auto mom0 = momentum_expected_sq_grad(c, dd, sigma, static_cast<double>(k), 0.0, etas);
    for (std::size_t i = 0; i < mom0.size(); ++i) EXPECT_NEAR(mom0[i], expect[i], 1e-12 * std::max(1.0, expect[i]));
}

TEST(QuadraticDynamics, MomentumSecondMomentMatchesSimulation) {
    const double c = 1.0;
    const double mu = 0.5;
    const std::vector<double> etas(15, 0.2);
    const auto expect = momentum_expected_sq_grad(c, 1.0, 0.8, 1.0, mu, etas);
    const int reps = 4000;
    std::vector<double> mean(etas.size() + 1), sq(etas.size() + 1);
    for (int r = 0; r < reps; ++r) {
        GradOracle o(make_quadratic(c, 2), NoiseModel::isotropic(0.8), derive_stream(14, "oracle", r));
        RngStream pr = derive_stream(14, "perturb", r);
        const auto t = run_nso(o, PerturbationDist::gaussian(0.1, 2), Vector{1.0, 1.0},
                               StepSchedule::explicit_steps(etas), 1, etas.size(), mu, pr);
        for (std::size_t i = 0; i <= etas.size(); ++i) {
            const double g2 = t.iterates[i].squared_norm();
            mean[i] += g2;
            sq[i] += g2 * g2;
        }
    }
    for (std::size_t i = 0; i <= etas.size(); ++i) {
        const double m = mean[i] / reps;
        const double se = std::sqrt(std::max(0.0, sq[i] / reps - m * m) / reps);
        EXPECT_LE(std::abs(m - expect[i]), 4.0 * se + 1e-12) << "t=" << i;
    }
}

TEST(QuadraticDynamics, MomentumPowerIterationMatchesTrajectory) {
    const double c = 1.5;
    const double eta = 0.2;
    for (double mu : {0.0, 0.5, 0.9}) {
        GradOracle o(make_quadratic(c, 1), NoiseModel::isotropic(0.3), RngStream(15, 0));
        RngStream pr(15, 1);
        RunOptions opts;
        opts.keep_estimates = true;
        const auto t =
            run_nso(o, PerturbationDist::gaussian(0.2, 1), Vector{0.7}, StepSchedule::constant(eta), 1, 40, mu, pr, opts);
        std::vector<double> xi;
        for (std::size_t i = 0; i < 40; ++i) xi.push_back(t.estimates[i][0] - c * t.iterates[i][0]);
        const auto states = momentum_closed_form(c, eta, mu, 0.7, xi);
        for (std::size_t i = 0; i <= 40; ++i) {
            EXPECT_NEAR(states[i][0], t.iterates[i][0], 1e-10);
            EXPECT_NEAR(states[i][1], t.momenta[i][0], 1e-10);
        }
    }
    const Mat2 x = momentum_transition(1.0, 0.1, 0.9);
    const Mat2 x3 = mat2_mul(x, mat2_mul(x, x));
    const Mat2 p3 = mat2_pow(x, 3);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(p3[i], x3[i], 1e-15);
}
