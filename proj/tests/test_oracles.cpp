#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "nso/oracles.hpp"

using namespace nso;

TEST(Oracle, ExactReturnsGradient) {
    GradOracle o = make_exact_oracle(make_quadratic(1.0, 2));
    EXPECT_EQ(o.query(Vector{3.0, 0.0}, 0), (Vector{3.0, 0.0}));
    EXPECT_EQ(o.query_count(), 1u);
}

TEST(Oracle, IsotropicNoiseIsUnbiasedWithTotalVarianceSigmaSquared) {
    auto f = make_quadratic(1.0, 4);
    GradOracle o(f, NoiseModel::isotropic(1.0), RngStream(1, 0));
    const Vector w{0.5, -1.0, 2.0, 0.0};
    const Vector g = f->gradient(w);
    const int m = 100000;
    Vector mean(4);
    double var = 0.0;
    for (int i = 0; i < m; ++i) {
        const Vector z = o.query(w, i) - g;
        mean += z;
        var += z.squared_norm();
    }
    mean *= 1.0 / m;
    for (double x : mean) EXPECT_LE(std::abs(x), 0.02);
    EXPECT_LE(mean.norm(), 5.0 / std::sqrt(m));
    EXPECT_NEAR(var / m, 1.0, 0.02);
}

TEST(Oracle, AdversarialNoiseOnNextCoordinate) {
    auto f = make_quadratic(1.0, 5);
    GradOracle o(f, NoiseModel::coordinate_adversarial(1.0), RngStream(2, 0));
    const Vector w(5);
    int plus = 0;
    const int m = 10000;
    for (int i = 0; i < m; ++i) {
        const Vector g = o.query(w, 0);
        for (std::size_t j = 0; j < 5; ++j)
            if (j != 1) ASSERT_EQ(g[j], 0.0);
        ASSERT_EQ(std::abs(g[1]), 1.0);
        plus += g[1] > 0.0;
    }
    EXPECT_NEAR(static_cast<double>(plus) / m, 0.5, 0.01);
    const OracleNoise z = o.draw(3);
    EXPECT_EQ(z.coordinate, 4u);
    EXPECT_THROW(o.draw(4), std::invalid_argument);
}

TEST(NsoEstimate, QuadraticCancellation) {
    RngStream rng(3, 0);
    for (double c : {0.5, 1.0, 4.0})
        for (std::size_t k : {1u, 2u, 8u})
            for (double sp : {0.0, 0.1, 10.0}) {
                auto f = make_quadratic(c, 6);
                GradOracle o = make_exact_oracle(f);
                Vector w(6);
                for (double& x : w) x = rng.normal();
                const auto est =
                    nso_gradient_estimate(o, PerturbationDist::gaussian(sp, 6), w, k, 0, rng);
                const Vector g = f->gradient(w);
                EXPECT_LE(distance(est.estimate, g), 1e-12 * g.norm());
                EXPECT_EQ(o.query_count(), 2 * k);
            }
}

TEST(NsoEstimate, ZeroSigmaReturnsOracle) {
    auto f = make_quartic(3);
    GradOracle o = make_exact_oracle(f);
    RngStream rng(4, 0);
    const Vector w{0.2, -0.7, 1.1};
    const auto est = nso_gradient_estimate(o, PerturbationDist::gaussian(0.0, 3), w, 1, 0, rng);
    EXPECT_EQ(est.estimate, f->gradient(w));
}

TEST(NsoEstimate, QuarticTwoPointByHand) {
    auto f = make_quartic(1);
    const Vector est = nso_estimate_from(*f, Vector{1.0}, {Vector{0.5}}, {OracleNoise{}});
    EXPECT_DOUBLE_EQ(est[0], 7.0);
}

TEST(NsoEstimate, PairSharesOracleNoise) {
    auto f = make_quadratic(1.0, 3);
    GradOracle o(f, NoiseModel::isotropic(2.0), RngStream(5, 0));
    RngStream rng(6, 0);
    const int m = 40000;
    for (std::size_t k : {1u, 4u}) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) {
            const Vector w{0.1, 0.2, 0.3};
            const auto est = nso_gradient_estimate(o, PerturbationDist::gaussian(0.3, 3), w, k, 0, rng);
            s += (est.estimate - f->gradient(w)).squared_norm();
        }
        EXPECT_NEAR(s / m, 4.0 / static_cast<double>(k), 0.03 * 4.0 / static_cast<double>(k));
    }
}

TEST(NsoEstimate, UnbiasedForPopulationGradient) {
    auto f = make_quartic(2);
    GradOracle o = make_exact_oracle(f);
    const auto dist = PerturbationDist::gaussian(0.3, 2);
    const Vector w{0.7, -0.4};
    const Vector target = *f->population_gradient(w, dist);
    RngStream rng(7, 0);
    const int m = 100000;
    Vector mean(2);
    Vector sq(2);
    for (int i = 0; i < m; ++i) {
        const Vector e = nso_gradient_estimate(o, dist, w, 1, 0, rng).estimate;
        mean += e;
        for (std::size_t j = 0; j < 2; ++j) sq[j] += e[j] * e[j];
    }
    mean *= 1.0 / m;
    for (std::size_t j = 0; j < 2; ++j) {
        const double se = std::sqrt((sq[j] / m - mean[j] * mean[j]) / m);
        EXPECT_LE(std::abs(mean[j] - target[j]), 4.0 * se);
    }
}

TEST(DeltaXi, DegenerateCases) {
    const GradOracle quad(make_quadratic(2.0, 4), NoiseModel::isotropic(1.0), RngStream(8, 0));
    const auto q = delta_xi_decomposition(quad, PerturbationDist::gaussian(0.5, 4), Vector(4, 1.0), 3, 200,
                                          RngStream(8, 1));
    EXPECT_LE(q.var_delta, 1e-28);
    EXPECT_TRUE(q.exact_center);
    const GradOracle exact = make_exact_oracle(make_quartic(2));
    const auto e = delta_xi_decomposition(exact, PerturbationDist::gaussian(0.5, 2), Vector(2, 1.0), 2, 200,
                                          RngStream(8, 2));
    EXPECT_EQ(e.var_xi, 0.0);
}

TEST(DeltaXi, VarianceBoundsAndOneOverKScaling) {
    auto bench = make_smooth_convex_bench(5, 1.0, 1.0);
    const double c = bench->lipschitz();
    const auto dist = PerturbationDist::gaussian(0.05, 5);
    const double sigma = 0.7;
    const GradOracle o(bench, NoiseModel::isotropic(sigma), RngStream(9, 0));
    const Vector w(5, 0.02);
    const std::size_t m = 20000;
    for (std::size_t k : {1u, 2u, 4u, 8u}) {
        const auto r = delta_xi_decomposition(o, dist, w, k, m, RngStream(9, k));
        const double slack = 1.0 + 3.0 / std::sqrt(static_cast<double>(m));
        const double kk = static_cast<double>(k);
        EXPECT_LE(r.var_delta, c * c * dist.h_moment() / kk * slack) << "k=" << k;
        EXPECT_LE(r.var_xi, sigma * sigma / kk * slack) << "k=" << k;
    }
    const GradOracle q = make_exact_oracle(make_quartic(1));
    const auto d1 = delta_xi_decomposition(q, PerturbationDist::gaussian(0.1, 1), Vector{1.0}, 1, 100000,
                                           RngStream(10, 1));
    const auto d4 = delta_xi_decomposition(q, PerturbationDist::gaussian(0.1, 1), Vector{1.0}, 4, 100000,
                                           RngStream(10, 4));
    EXPECT_NEAR(d1.var_delta / d4.var_delta, 4.0, 0.8);
}

TEST(DeltaXi, RejectsTinyM) {
    const GradOracle o = make_exact_oracle(make_quartic(1));
    EXPECT_THROW(delta_xi_decomposition(o, PerturbationDist::gaussian(0.1, 1), Vector{1.0}, 1, 1, RngStream(1, 1)),
                 std::invalid_argument);
}
