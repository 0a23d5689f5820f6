#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "nso/analysis.hpp"
#include "nso/kernels.hpp"
#include "nso/sensing.hpp"

using namespace nso;

namespace {

Vector random_matrix(RngStream& rng, std::size_t d, double scale) {
    Vector w(d * d);
    for (double& x : w) x = scale * rng.normal();
    return w;
}

// (1/2n) sum (<A_i, W W^T> - y_i)^2 straight from the full matrices.
double reference_loss(const MeasurementSet& m, const Vector& w) {
    const std::size_t d = m.d();
    double total = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto a = m.full(i);
        double inner = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = 0; q < d; ++q) {
                double x = 0.0;
                for (std::size_t c = 0; c < d; ++c) x += w[p * d + c] * w[q * d + c];
                inner += a[p * d + q] * x;
            }
        const double r = inner - m.targets()[i];
        total += r * r;
    }
    return total / (2.0 * static_cast<double>(m.size()));
}

}  // namespace

TEST(Sensing, InterpolationAtTruth) {
    auto ms = make_matrix_sensing(6, 2, 40, RngStream(3, 1));
    const Vector u = ms.instance.padded_truth();
    EXPECT_LE(ms.objective->value(u), 1e-20);
    EXPECT_LE(ms.objective->gradient(u).norm(), 1e-9);
    const auto res = ms.objective->residuals(u);
    for (double r : res) EXPECT_EQ(r, 0.0);
}

TEST(Sensing, ValueAtZero) {
    auto ms = make_matrix_sensing(5, 2, 30, RngStream(3, 2));
    double expect = 0.0;
    for (double y : ms.instance.train->targets()) expect += y * y;
    expect /= 2.0 * 30.0;
    EXPECT_NEAR(ms.objective->value(Vector(25)), expect, 1e-12 * expect);
}

TEST(Sensing, LossMatchesFullMatrixReference) {
    auto ms = make_matrix_sensing(4, 2, 25, RngStream(3, 3));
    RngStream rng(5, 0);
    for (int t = 0; t < 5; ++t) {
        const Vector w = random_matrix(rng, 4, 1.0);
        const double ref = reference_loss(*ms.instance.train, w);
        EXPECT_NEAR(ms.objective->value(w), ref, 1e-10 * ref);
    }
}

TEST(Sensing, GradientMatchesFiniteDifferences) {
    for (std::size_t n : {std::size_t{20}, std::size_t{3}}) {
        // n = 20 takes the Gram path for d = 3 (p = 6); n = 3 keeps the row path.
        auto ms = make_matrix_sensing(3, 1, n, RngStream(7, n));
        RngStream rng(9, n);
        const Vector w = random_matrix(rng, 3, 1.0);
        const Vector g = ms.objective->gradient(w);
        Vector fd(9);
        const double h = 1e-5;
        for (std::size_t i = 0; i < 9; ++i) {
            Vector a = w;
            Vector b = w;
            a[i] += h;
            b[i] -= h;
            fd[i] = (ms.objective->value(a) - ms.objective->value(b)) / (2.0 * h);
        }
        EXPECT_LE(distance(g, fd) / g.norm(), 1e-6);
        const Vector v = random_matrix(rng, 3, 1.0);
        Vector fdh = ms.objective->gradient(w + 1e-6 * v) - ms.objective->gradient(w - 1e-6 * v);
        fdh *= 1.0 / 2e-6;
        EXPECT_LE(distance(ms.objective->hvp(w, v), fdh) / fdh.norm(), 1e-6);
    }
}

TEST(Sensing, GramPathMatchesFullMatrixGradient) {
    auto inst = make_sensing_instance(6, 2, 60, RngStream(11, 0));
    const SensingObjective obj(inst.train);
    ASSERT_TRUE(obj.uses_gram());
    auto small = make_sensing_instance(6, 2, 10, RngStream(11, 0));
    ASSERT_FALSE(SensingObjective(small.train).uses_gram());
    RngStream rng(12, 0);
    const Vector w = random_matrix(rng, 6, 1.0);
    // (1/n) sum r_i (A_i + A_i^T) W from the full matrices.
    const auto r = obj.residuals(w);
    const std::size_t d = 6;
    Vector ref(d * d);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const auto a = inst.train->full(i);
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t c = 0; c < d; ++c) {
                double s = 0.0;
                for (std::size_t q = 0; q < d; ++q) s += (a[p * d + q] + a[q * d + p]) * w[q * d + c];
                ref[p * d + c] += r[i] * s / static_cast<double>(r.size());
            }
    }
    EXPECT_LE(distance(obj.gradient(w), ref) / ref.norm(), 1e-11);
}

TEST(Sensing, SerialAndParallelBitwiseEqual) {
    auto inst = make_sensing_instance(12, 2, 400, RngStream(13, 0));
    const SensingObjective s(inst.train, KernelMode::Serial);
    const SensingObjective p(inst.train, KernelMode::Parallel);
    RngStream rng(14, 0);
    const Vector w = random_matrix(rng, 12, 1.0);
    const Vector v = random_matrix(rng, 12, 1.0);
    for (int threads : {1, 3, 8}) {
        kernels::set_thread_count(threads);
        EXPECT_EQ(s.value(w), p.value(w));
        EXPECT_EQ(s.gradient(w), p.gradient(w));
        EXPECT_EQ(s.hvp(w, v), p.hvp(w, v));
        EXPECT_EQ(s.hessian_trace(w), p.hessian_trace(w));
    }
}

TEST(Sensing, HessianTraceMatchesBasisHvps) {
    auto ms = make_matrix_sensing(4, 2, 30, RngStream(15, 0));
    RngStream rng(16, 0);
    const Vector w = random_matrix(rng, 4, 1.0);
    EXPECT_NEAR(ms.objective->hessian_trace(w), exact_trace(*ms.objective, w), 1e-9 * exact_trace(*ms.objective, w));
}

TEST(Sensing, TraceFormulaExamples) {
    RngStream rng(17, 0);
    auto set = MeasurementSet::generate(2, 1, rng);
    EXPECT_EQ(sensing_trace_formula(set, Vector(4)), 0.0);
    // With W = I the formula reduces to ||A||_F^2.
    const Vector eye{1.0, 0.0, 0.0, 1.0};
    double fro = 0.0;
    for (double a : set.full(0)) fro += a * a;
    EXPECT_NEAR(sensing_trace_formula(set, eye), fro, 1e-14);
}

TEST(Sensing, TraceConcentrationAcrossInstances) {
    const std::size_t d = 20;
    const std::size_t n = 2000;
    const double tol = 3.0 * std::sqrt(8.0 / static_cast<double>(n));
    int within = 0;
    for (int i = 0; i < 100; ++i) {
        RngStream meas = derive_stream(23, "concentration/meas", i);
        RngStream wr = derive_stream(23, "concentration/w", i);
        auto set = MeasurementSet::generate(d, n, meas);
        const Vector w = random_matrix(wr, d, 1.0);
        within += sensing_trace_deviation(set, w) <= tol;
    }
    EXPECT_GE(within, 95);
}

TEST(Sensing, RejectsBadShapes) {
    EXPECT_THROW(make_matrix_sensing(3, 4, 10, RngStream(1, 1)), std::invalid_argument);
    EXPECT_THROW(make_matrix_sensing(3, 0, 10, RngStream(1, 1)), std::invalid_argument);
    EXPECT_THROW(make_matrix_sensing(3, 1, 0, RngStream(1, 1)), std::invalid_argument);
}

TEST(Sensing, InstanceJsonRoundTrip) {
    auto inst = make_sensing_instance(5, 2, 20, derive_stream(4, "sensing/instance", 2));
    const auto path = std::filesystem::temp_directory_path() / "nso_instance_roundtrip.json";
    save_sensing_instance(inst, path);
    const auto back = load_sensing_instance(path);
    EXPECT_EQ(back.u_star, inst.u_star);
    EXPECT_EQ(back.train->targets(), inst.train->targets());
    {
        std::ofstream out(path);
        out << R"({"d": 5, "r": 2, "n": 20, "seed": 4, "stream_id": 1, "extra": 0})";
    }
    EXPECT_THROW(load_sensing_instance(path), std::invalid_argument);
    std::filesystem::remove(path);
}

TEST(Sensing, HoldoutSetSharesTruth) {
    auto inst = make_sensing_instance(5, 1, 20, RngStream(31, 0));
    auto hold = inst.fresh_measurements(50, 0);
    const SensingObjective val(hold);
    EXPECT_LE(val.value(inst.padded_truth()), 1e-20);
    EXPECT_NE(hold->full(0)[0], inst.train->full(0)[0]);
}
