#include "nso/oracles.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nso/kernels.hpp"

namespace nso {

NoiseModel NoiseModel::isotropic(double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("isotropic noise: sigma must be >= 0");
    return {NoiseKind::Isotropic, sigma};
}

NoiseModel NoiseModel::coordinate_adversarial(double cap) {
    if (!(cap >= 0.0) || !std::isfinite(cap)) throw std::invalid_argument("adversarial noise: cap must be >= 0");
    return {NoiseKind::CoordinateAdversarial, cap};
}

void OracleNoise::add_to(Vector& g) const {
    if (coordinate != kDense) {
        g[coordinate] += value;
    } else if (dense.dim() != 0) {
        g += dense;
    }
}

Vector OracleNoise::to_vector(std::size_t dim) const {
    Vector v(dim);
    add_to(v);
    return v;
}

GradOracle::GradOracle(ObjectivePtr objective, NoiseModel noise, RngStream rng)
    : objective_(std::move(objective)), noise_(noise), rng_(rng) {
    if (!objective_) throw std::invalid_argument("GradOracle: null objective");
}

OracleNoise GradOracle::draw(std::size_t step) {
    OracleNoise out;
    switch (noise_.kind) {
        case NoiseKind::Exact: break;
        case NoiseKind::Isotropic: {
            const std::size_t d = dim();
            const double scale = noise_.level / std::sqrt(static_cast<double>(d));
            out.dense = Vector(d);
            for (std::size_t i = 0; i < d; ++i) out.dense[i] = scale * rng_.normal();
            break;
        }
        case NoiseKind::CoordinateAdversarial:
            if (step + 1 >= dim())
                throw std::invalid_argument("adversarial oracle exhausted: step " + std::to_string(step) +
                                            " needs coordinate " + std::to_string(step + 1) + " but d = " +
                                            std::to_string(dim()));
            out.coordinate = step + 1;
            out.value = rng_.rademacher() * noise_.level;
            break;
    }
    return out;
}

Vector GradOracle::query(const Vector& w, const OracleNoise& noise) {
    Vector g = objective_->gradient(w);
    noise.add_to(g);
    ++queries_;
    return g;
}

GradOracle make_exact_oracle(ObjectivePtr objective) {
    return {std::move(objective), NoiseModel::exact(), RngStream(0, 0)};
}

NsoEstimate nso_gradient_estimate(GradOracle& oracle, const PerturbationDist& dist, const Vector& w, std::size_t k,
                                  std::size_t step, RngStream& rng) {
    if (k < 1) throw std::invalid_argument("nso_gradient_estimate: k must be >= 1");
    if (dist.dim() != oracle.dim()) throw std::invalid_argument("nso_gradient_estimate: perturbation dimension mismatch");
    require_same_dim(w, Vector(oracle.dim()), "nso_gradient_estimate");
    NsoEstimate out;
    out.estimate = Vector(w.dim());
    out.perturbations.reserve(k);
    out.noise.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        Vector u = dist.sample(rng);
        OracleNoise z = oracle.draw(step);
        out.estimate += oracle.query(w + u, z);
        out.estimate += oracle.query(w - u, z);
        out.perturbations.push_back(std::move(u));
        out.noise.push_back(std::move(z));
    }
    out.estimate *= 1.0 / (2.0 * static_cast<double>(k));
    return out;
}

Vector nso_estimate_from(const Objective& objective, const Vector& w, const std::vector<Vector>& perturbations,
                         const std::vector<OracleNoise>& noise) {
    if (perturbations.empty() || noise.size() != perturbations.size())
        throw std::invalid_argument("nso_estimate_from: inconsistent recorded randomness");
    Vector est(w.dim());
    for (std::size_t j = 0; j < perturbations.size(); ++j) {
        Vector plus = objective.gradient(w + perturbations[j]);
        noise[j].add_to(plus);
        Vector minus = objective.gradient(w - perturbations[j]);
        noise[j].add_to(minus);
        est += plus;
        est += minus;
    }
    est *= 1.0 / (2.0 * static_cast<double>(perturbations.size()));
    return est;
}

DeltaXi delta_xi_decomposition(const GradOracle& oracle, const PerturbationDist& dist, const Vector& w,
                               std::size_t k, std::size_t m, const RngStream& rng) {
    if (m < 2) throw std::invalid_argument("delta_xi_decomposition: need m >= 2 repetitions");
    if (k < 1) throw std::invalid_argument("delta_xi_decomposition: k must be >= 1");
    const Objective& obj = oracle.objective();
    const std::size_t d = obj.dim();
    const auto center = obj.population_gradient(w, dist);

    // Per-repetition exact estimates and noise norms, filled independently.
    std::vector<Vector> exact(m);
    std::vector<double> xi_sq(m);
    kernels::parallel::for_each_index(m, [&](std::size_t rep) {
        RngStream u_rng = rng.child("delta_xi_u", rep);
        GradOracle noisy = oracle.with_stream(rng.child("delta_xi_z", rep));
        Vector sum_exact(d);
        Vector xi(d);
        for (std::size_t j = 0; j < k; ++j) {
            const Vector u = dist.sample(u_rng);
            sum_exact += obj.gradient(w + u);
            sum_exact += obj.gradient(w - u);
            noisy.draw(0).add_to(xi);
        }
        // The pair average of identical noise is the noise itself.
        xi *= 1.0 / static_cast<double>(k);
        sum_exact *= 1.0 / (2.0 * static_cast<double>(k));
        exact[rep] = std::move(sum_exact);
        xi_sq[rep] = xi.squared_norm();
    });

    Vector mean(d);
    if (center) {
        mean = *center;
    } else {
        for (const auto& e : exact) mean += e;
        mean *= 1.0 / static_cast<double>(m);
    }
    std::vector<double> delta_sq(m);
    for (std::size_t rep = 0; rep < m; ++rep) delta_sq[rep] = (exact[rep] - mean).squared_norm();

    auto moments = [m](const std::vector<double>& xs, double correction) {
        double s = 0.0;
        for (double x : xs) s += x;
        const double mu = s / static_cast<double>(m);
        double ss = 0.0;
        for (double x : xs) ss += (x - mu) * (x - mu);
        const double se = std::sqrt(ss / static_cast<double>(m - 1) / static_cast<double>(m));
        return std::pair{mu * correction, se * correction};
    };
    DeltaXi out;
    out.exact_center = center.has_value();
    const double corr = center ? 1.0 : static_cast<double>(m) / static_cast<double>(m - 1);
    std::tie(out.var_delta, out.se_delta) = moments(delta_sq, corr);
    std::tie(out.var_xi, out.se_xi) = moments(xi_sq, 1.0);
    return out;
}

}  // namespace nso
