#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "nso/analysis.hpp"
#include "nso/optimizers.hpp"

using namespace nso;

namespace {

Vector random_point(RngStream& rng, std::size_t d) {
    Vector w(d);
    for (double& x : w) x = rng.normal();
    return w;
}

}  // namespace

TEST(Schedule, ConstantAndExplicit) {
    const auto c = StepSchedule::constant(0.1);
    EXPECT_DOUBLE_EQ(c.at(1000), 0.1);
    EXPECT_NEAR(c.sum(10), 1.0, 1e-15);
    const auto e = StepSchedule::explicit_steps({0.5, 1.5, 0.2});
    EXPECT_DOUBLE_EQ(e.at(1), 1.5);
    EXPECT_THROW(e.at(3), std::invalid_argument);
    EXPECT_THROW(e.require_length(4), std::invalid_argument);
    EXPECT_EQ(e.steps_at_or_above(1.0, 3), (std::vector<std::size_t>{1}));
    EXPECT_THROW(StepSchedule::constant(-1.0), std::invalid_argument);
}

TEST(RunNso, QuadraticFirstStep) {
    GradOracle o = make_exact_oracle(make_quadratic(1.0, 2));
    RngStream rng(1, 0);
    const auto t = run_nso(o, PerturbationDist::gaussian(3.0, 2), Vector{1.0, 0.0}, StepSchedule::constant(0.5), 1, 1,
                           std::nullopt, rng);
    EXPECT_EQ(t.iterates[1], (Vector{0.5, 0.0}));
}

TEST(RunNso, MomentumTwoStepsByHand) {
    GradOracle o = make_exact_oracle(make_quadratic(1.0, 1));
    RngStream rng(2, 0);
    const auto t = run_nso(o, PerturbationDist::gaussian(0.0, 1), Vector{1.0}, StepSchedule::constant(0.1), 1, 2, 0.9,
                           rng);
    EXPECT_NEAR(t.iterates[1][0], 0.9, 1e-15);
    EXPECT_NEAR(t.iterates[2][0], 0.72, 1e-15);
    // Independent 2 x 2 iteration of (W, M).
    const Mat2 x = momentum_transition(1.0, 0.1, 0.9);
    double w = 1.0;
    double m = 0.0;
    for (int s = 0; s < 2; ++s) {
        const double nw = x[0] * w + x[1] * m;
        const double nm = x[2] * w + x[3] * m;
        w = nw;
        m = nm;
    }
    EXPECT_NEAR(t.iterates[2][0], w, 1e-15);
    EXPECT_NEAR(t.momenta[2][0], m, 1e-15);
}

TEST(RunNso, ZeroMomentumBitwiseEqualsPlainPath) {
    auto f = make_quartic(4);
    const auto dist = PerturbationDist::gaussian(0.2, 4);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        GradOracle a(f, NoiseModel::isotropic(0.5), RngStream(seed, 10));
        GradOracle b(f, NoiseModel::isotropic(0.5), RngStream(seed, 10));
        RngStream ra(seed, 20);
        RngStream rb(seed, 20);
        const Vector w0{0.3, -0.2, 0.5, 0.1};
        const auto plain = run_nso(a, dist, w0, StepSchedule::constant(0.05), 3, 50, std::nullopt, ra);
        const auto zero = run_nso(b, dist, w0, StepSchedule::constant(0.05), 3, 50, 0.0, rb);
        ASSERT_EQ(plain.iterates.size(), zero.iterates.size());
        for (std::size_t t = 0; t < plain.iterates.size(); ++t) ASSERT_EQ(plain.iterates[t], zero.iterates[t]);
    }
}

TEST(RunNso, QuadraticEquivalenceWithGd) {
    RngStream rng(4, 0);
    for (std::size_t k : {1u, 3u, 8u})
        for (double sp : {0.0, 0.5, 5.0}) {
            auto f = make_quadratic(2.0, 5);
            GradOracle a = make_exact_oracle(f);
            GradOracle b = make_exact_oracle(f);
            const Vector w0 = random_point(rng, 5);
            RngStream pr(5, k);
            const auto nso = run_nso(a, PerturbationDist::gaussian(sp, 5), w0, StepSchedule::constant(0.1), k, 30,
                                     std::nullopt, pr);
            const auto gd = run_sgd(b, w0, StepSchedule::constant(0.1), 30);
            for (std::size_t t = 0; t <= 30; ++t)
                ASSERT_LE(distance(nso.iterates[t], gd.iterates[t]), 1e-12 * std::max(1.0, gd.iterates[t].norm()));
            EXPECT_EQ(nso.total_queries, 2 * k * 30);
        }
}

TEST(RunNso, ZeroSigmaMatchesSgd) {
    auto f = make_quartic(3);
    GradOracle a = make_exact_oracle(f);
    GradOracle b = make_exact_oracle(f);
    RngStream rng(6, 0);
    const Vector w0{0.4, -0.3, 0.2};
    const auto nso = run_nso(a, PerturbationDist::gaussian(0.0, 3), w0, StepSchedule::constant(0.1), 1, 40,
                             std::nullopt, rng);
    const auto gd = run_sgd(b, w0, StepSchedule::constant(0.1), 40);
    for (std::size_t t = 0; t <= 40; ++t) EXPECT_EQ(nso.iterates[t], gd.iterates[t]);
}

TEST(RunNso, RejectsBadArguments) {
    GradOracle o = make_exact_oracle(make_quadratic(1.0, 2));
    RngStream rng(1, 1);
    const auto dist = PerturbationDist::gaussian(0.1, 2);
    EXPECT_THROW(run_nso(o, dist, Vector(3), StepSchedule::constant(0.1), 1, 3, std::nullopt, rng),
                 std::invalid_argument);
    EXPECT_THROW(run_nso(o, dist, Vector(2), StepSchedule::constant(0.1), 0, 3, std::nullopt, rng),
                 std::invalid_argument);
    EXPECT_THROW(run_nso(o, dist, Vector(2), StepSchedule::constant(0.1), 1, 3, 1.0, rng), std::invalid_argument);
    GradOracle adv(make_quadratic(1.0, 3), NoiseModel::coordinate_adversarial(1.0), RngStream(1, 2));
    EXPECT_THROW(run_nso(adv, PerturbationDist::gaussian(0.1, 3), Vector(3), StepSchedule::constant(0.1), 1, 3,
                         std::nullopt, rng),
                 std::invalid_argument);
}

TEST(RunNso, DivergenceGuard) {
    GradOracle o = make_exact_oracle(make_quartic(2));
    RngStream rng(1, 3);
    EXPECT_THROW(run_nso(o, PerturbationDist::gaussian(0.0, 2), Vector{10.0, 10.0}, StepSchedule::constant(1.0), 1,
                         50, std::nullopt, rng),
                 Diverged);
}

TEST(RunNso, ReplayReproducesEveryStep) {
    auto f = make_quartic(4);
    GradOracle o(f, NoiseModel::isotropic(0.3), RngStream(7, 0));
    RngStream rng(7, 1);
    RunOptions opts;
    opts.keep_randomness = true;
    for (std::optional<double> mu : {std::optional<double>{}, std::optional<double>{0.6}}) {
        const auto t = run_nso(o, PerturbationDist::gaussian(0.1, 4), Vector{0.5, 0.2, -0.4, 0.1},
                               StepSchedule::constant(0.05), 2, 25, mu, rng, opts);
        for (std::size_t i = 0; i < 25; ++i) {
            const Vector next = replay_step(t, *f, i);
            ASSERT_LE(distance(next, t.iterates[i + 1]), 1e-12 * std::max(1.0, next.norm()));
        }
    }
}

TEST(RunNso, DescentWithExactOracle) {
    auto f = make_smooth_convex_bench(4, 1.0, 1.0);
    GradOracle o = make_exact_oracle(f);
    RngStream rng(8, 0);
    const auto t = run_nso(o, PerturbationDist::gaussian(0.0, 4), Vector(4, 0.5), StepSchedule::constant(0.9 / f->lipschitz()),
                           1, 200, std::nullopt, rng);
    for (std::size_t i = 0; i < t.records.size() - 1; ++i)
        EXPECT_LE(t.records[i + 1].f_value, t.records[i].f_value);
}

TEST(RunWpSgd, HandStepAndBudget) {
    GradOracle o = make_exact_oracle(make_quadratic(1.0, 1));
    RngStream rng(9, 0);
    RunOptions opts;
    opts.keep_randomness = true;
    const auto t = run_wp_sgd(o, PerturbationDist::gaussian(0.4, 1), Vector{1.0}, StepSchedule::constant(0.5), 1, rng, opts);
    const double u = t.perturbations[0][0][0];
    EXPECT_DOUBLE_EQ(t.iterates[1][0], 1.0 - 0.5 * (1.0 + u));
    // The example point U_0 = 0.2 through the same update.
    EXPECT_DOUBLE_EQ(1.0 - 0.5 * (1.0 + 0.2), 0.4);
    GradOracle many = make_exact_oracle(make_quadratic(1.0, 3));
    const auto t2 = run_wp_sgd(many, PerturbationDist::gaussian(0.1, 3), Vector(3, 1.0), StepSchedule::constant(0.1), 17, rng);
    EXPECT_EQ(t2.total_queries, 17u);
    GradOracle a = make_exact_oracle(make_quartic(2));
    GradOracle b = make_exact_oracle(make_quartic(2));
    const auto wp = run_wp_sgd(a, PerturbationDist::gaussian(0.0, 2), Vector{0.3, 0.1}, StepSchedule::constant(0.1), 20, rng);
    const auto gd = run_sgd(b, Vector{0.3, 0.1}, StepSchedule::constant(0.1), 20);
    for (std::size_t i = 0; i <= 20; ++i) EXPECT_EQ(wp.iterates[i], gd.iterates[i]);
}

TEST(RunSgd, Examples) {
    GradOracle o = make_exact_oracle(make_quadratic(1.0, 3));
    const auto t = run_sgd(o, Vector{3.0, -1.0, 2.0}, StepSchedule::constant(1.0), 1);
    EXPECT_EQ(t.iterates[1], Vector(3));
    // Zero steps are rejected by the schedule; a step far below the ulp of W leaves it unchanged.
    EXPECT_THROW(StepSchedule::constant(0.0), std::invalid_argument);
    const auto s = run_sgd(o, Vector{3.0, -1.0, 2.0}, StepSchedule::explicit_steps({1e-300, 1e-300}), 2);
    EXPECT_EQ(s.iterates[2], (Vector{3.0, -1.0, 2.0}));
}

TEST(RandomIterate, ConstantStepIsUniform) {
    RngStream rng(11, 0);
    const std::vector<double> etas(10, 0.3);
    std::vector<int> counts(10, 0);
    const int m = 100000;
    for (int i = 0; i < m; ++i) ++counts[draw_iterate_index(etas, rng)];
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - m / 10.0) * (c - m / 10.0) / (m / 10.0);
    // 99.9% quantile of chi-square with 9 degrees of freedom.
    EXPECT_LT(chi2, 27.88);
}

TEST(RandomIterate, WeightedAndSingleStep) {
    RngStream rng(12, 0);
    int ones = 0;
    for (int i = 0; i < 10000; ++i) ones += draw_iterate_index({1.0, 3.0}, rng) == 1;
    EXPECT_NEAR(ones / 10000.0, 0.75, 0.01);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(draw_iterate_index({0.7}, rng), 0u);
    GradOracle o = make_exact_oracle(make_quadratic(1.0, 1));
    const auto t = run_sgd(o, Vector{2.0}, StepSchedule::constant(0.5), 1);
    const auto sel = select_random_iterate(t, rng);
    EXPECT_EQ(sel.index, 0u);
    EXPECT_EQ(sel.point, Vector{2.0});
}

TEST(AverageIterates, Examples) {
    GradOracle o = make_exact_oracle(make_quadratic(1.0, 2));
    const auto c = run_sgd(o, Vector(2), StepSchedule::constant(0.5), 5);
    EXPECT_EQ(average_iterates(c), Vector(2));
    Trajectory t;
    t.steps = 2;
    t.iterate_sum = Vector{2.0};
    t.iterates = {Vector{5.0}, Vector{0.0}, Vector{2.0}};
    EXPECT_EQ(average_iterates(t), Vector{1.0});
}

TEST(AverageIterates, ConvexityOfSmoothedObjective) {
    auto f = make_smooth_convex_bench(4, 1.0, 1.0);
    const auto dist = PerturbationDist::gaussian(0.05, 4);
    GradOracle o = make_exact_oracle(f);
    RngStream rng(13, 0);
    const auto t = run_nso(o, dist, Vector(4, 0.5), StepSchedule::constant(0.05), 1, 40, std::nullopt, rng);
    const Vector avg = average_iterates(t);
    const RngStream mc(13, 1);
    const double at_avg = population_value(*f, dist, avg, 20000, mc).value;
    double mean = 0.0;
    for (std::size_t i = 1; i <= 40; ++i) mean += population_value(*f, dist, t.iterates[i], 20000, mc).value;
    mean /= 40.0;
    EXPECT_LE(at_avg, mean);
}
