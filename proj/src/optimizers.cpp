#include "nso/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nso {

StepSchedule StepSchedule::constant(double eta) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("step size must be finite and > 0");
    return {Kind::Constant, {eta}};
}

StepSchedule StepSchedule::explicit_steps(std::vector<double> etas) {
    if (etas.empty()) throw std::invalid_argument("explicit schedule must be non-empty");
    for (double e : etas)
        if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("step sizes must be finite and > 0");
    return {Kind::Explicit, std::move(etas)};
}

double StepSchedule::at(std::size_t i) const {
    if (kind_ == Kind::Constant) return etas_.front();
    if (i >= etas_.size()) throw std::invalid_argument("explicit schedule shorter than the run");
    return etas_[i];
}

void StepSchedule::require_length(std::size_t steps) const {
    if (kind_ == Kind::Explicit && etas_.size() < steps)
        throw std::invalid_argument("explicit schedule has " + std::to_string(etas_.size()) + " steps, run needs " +
                                    std::to_string(steps));
}

std::vector<std::size_t> StepSchedule::steps_at_or_above(double inverse_c, std::size_t steps) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < steps; ++i)
        if (at(i) >= inverse_c) out.push_back(i);
    return out;
}

double StepSchedule::sum(std::size_t steps) const {
    double s = 0.0;
    for (std::size_t i = 0; i < steps; ++i) s += at(i);
    return s;
}

Diverged::Diverged(std::size_t step, double value)
    : std::runtime_error("run diverged at step " + std::to_string(step) + " (objective " + std::to_string(value) +
                         ")"),
      step_(step),
      value_(value) {}

namespace {

// Shared loop: `estimate(i, w, traj)` returns G_i and may record randomness.
template <class Estimate>
Trajectory run_loop(std::string method, GradOracle& oracle, const Vector& w0, const StepSchedule& schedule,
                    std::size_t steps, std::optional<double> mu, const RunOptions& options, Estimate&& estimate) {
    if (steps < 1) throw std::invalid_argument(method + ": T must be >= 1");
    if (w0.dim() != oracle.dim())
        throw std::invalid_argument(method + ": W0 has dimension " + std::to_string(w0.dim()) + ", objective has " +
                                    std::to_string(oracle.dim()));
    if (mu && (!(*mu >= 0.0) || !(*mu < 1.0))) throw std::invalid_argument(method + ": mu must lie in [0, 1)");
    if (options.record_every < 1) throw std::invalid_argument(method + ": record_every must be >= 1");
    schedule.require_length(steps);

    const Objective& obj = oracle.objective();
    Trajectory traj;
    traj.method = std::move(method);
    traj.mu = mu;
    traj.steps = steps;
    traj.initial = w0;
    traj.iterate_sum = Vector(w0.dim());
    traj.etas.reserve(steps);
    if (options.keep_iterates) {
        traj.iterates.reserve(steps + 1);
        traj.iterates.push_back(w0);
    }
    const std::uint64_t base_queries = oracle.query_count();

    Vector w = w0;
    Vector m(w0.dim());
    if (mu) traj.momenta.push_back(m);

    auto check = [&](std::size_t step, double f) {
        if (!(f <= options.divergence_threshold)) throw Diverged(step, f);
    };

    for (std::size_t i = 0; i < steps; ++i) {
        const bool record = i % options.record_every == 0;
        StepRecord rec;
        if (record) {
            rec.f_value = obj.value(w);
            check(i, rec.f_value);
            if (options.observer) options.observer(i, w);
        }
        const double eta = schedule.at(i);
        Vector g = estimate(i, w, traj);
        if (!g.all_finite()) throw Diverged(i, std::numeric_limits<double>::infinity());
        if (mu) {
            m *= *mu;
            m.axpy(-eta, g);
            w += m;
            traj.momenta.push_back(m);
        } else {
            w.axpy(-eta, g);
        }
        if (!w.all_finite()) throw Diverged(i + 1, std::numeric_limits<double>::infinity());
        traj.etas.push_back(eta);
        traj.iterate_sum += w;
        if (record) {
            rec.step = i;
            rec.eta = eta;
            rec.grad_est_norm = g.norm();
            rec.query_count = oracle.query_count() - base_queries;
            traj.records.push_back(rec);
        }
        if (options.keep_estimates) traj.estimates.push_back(std::move(g));
        if (options.keep_iterates) traj.iterates.push_back(w);
    }
    StepRecord last;
    last.step = steps;
    last.f_value = obj.value(w);
    check(steps, last.f_value);
    if (options.observer) options.observer(steps, w);
    last.query_count = oracle.query_count() - base_queries;
    traj.records.push_back(last);
    traj.total_queries = last.query_count;
    traj.final_iterate = std::move(w);
    traj.provenance.oracle_seed = oracle.stream().seed();
    traj.provenance.oracle_stream = oracle.stream().stream_id();
    return traj;
}

}  // namespace

Trajectory run_nso(GradOracle& oracle, const PerturbationDist& dist, const Vector& w0, const StepSchedule& schedule,
                   std::size_t k, std::size_t steps, std::optional<double> mu, RngStream& rng,
                   const RunOptions& options) {
    if (k < 1) throw std::invalid_argument("nso: k must be >= 1");
    if (dist.dim() != w0.dim()) throw std::invalid_argument("nso: perturbation dimension mismatch");
    const Provenance prov{rng.seed(), rng.stream_id(), oracle.stream().seed(), oracle.stream().stream_id()};
    auto traj = run_loop("nso", oracle, w0, schedule, steps, mu, options,
                         [&](std::size_t i, const Vector& w, Trajectory& t) {
                             auto est = nso_gradient_estimate(oracle, dist, w, k, i, rng);
                             if (options.keep_randomness) {
                                 t.perturbations.push_back(std::move(est.perturbations));
                                 t.noise.push_back(std::move(est.noise));
                             }
                             return std::move(est.estimate);
                         });
    traj.k = k;
    traj.provenance = prov;
    return traj;
}

Trajectory run_wp_sgd(GradOracle& oracle, const PerturbationDist& dist, const Vector& w0,
                      const StepSchedule& schedule, std::size_t steps, RngStream& rng, const RunOptions& options) {
    if (dist.dim() != w0.dim()) throw std::invalid_argument("wp_sgd: perturbation dimension mismatch");
    const Provenance prov{rng.seed(), rng.stream_id(), oracle.stream().seed(), oracle.stream().stream_id()};
    auto traj = run_loop("wp_sgd", oracle, w0, schedule, steps, std::nullopt, options,
                         [&](std::size_t i, const Vector& w, Trajectory& t) {
                             Vector u = dist.sample(rng);
                             OracleNoise z = oracle.draw(i);
                             Vector g = oracle.query(w + u, z);
                             if (options.keep_randomness) {
                                 t.perturbations.push_back({std::move(u)});
                                 t.noise.push_back({std::move(z)});
                             }
                             return g;
                         });
    traj.k = 1;
    traj.provenance = prov;
    return traj;
}

Trajectory run_sgd(GradOracle& oracle, const Vector& w0, const StepSchedule& schedule, std::size_t steps,
                   const RunOptions& options) {
    const Provenance prov{0, 0, oracle.stream().seed(), oracle.stream().stream_id()};
    auto traj = run_loop("sgd", oracle, w0, schedule, steps, std::nullopt, options,
                         [&](std::size_t i, const Vector& w, Trajectory& t) {
                             OracleNoise z = oracle.draw(i);
                             Vector g = oracle.query(w, z);
                             if (options.keep_randomness) {
                                 t.perturbations.push_back({});
                                 t.noise.push_back({std::move(z)});
                             }
                             return g;
                         });
    traj.k = 1;
    traj.provenance = prov;
    return traj;
}

std::size_t draw_iterate_index(const std::vector<double>& etas, RngStream& rng) {
    if (etas.empty()) throw std::invalid_argument("select_random_iterate: empty trajectory");
    std::vector<double> prefix(etas.size());
    std::partial_sum(etas.begin(), etas.end(), prefix.begin());
    const double u = rng.uniform() * prefix.back();
    const auto it = std::upper_bound(prefix.begin(), prefix.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - prefix.begin()), etas.size() - 1);
}

SelectedIterate select_random_iterate(const Trajectory& traj, RngStream& rng) {
    if (traj.iterates.size() != traj.steps + 1)
        throw std::invalid_argument("select_random_iterate: trajectory was run without keep_iterates");
    const std::size_t t = draw_iterate_index(traj.etas, rng);
    return {t, traj.iterates[t]};
}

Vector average_iterates(const Trajectory& traj) {
    if (traj.steps < 1) throw std::invalid_argument("average_iterates: T must be >= 1");
    Vector avg = traj.iterate_sum;
    avg *= 1.0 / static_cast<double>(traj.steps);
    return avg;
}

Vector replay_step(const Trajectory& traj, const Objective& objective, std::size_t i) {
    if (i >= traj.steps) throw std::invalid_argument("replay_step: step out of range");
    if (traj.iterates.size() != traj.steps + 1 || traj.noise.size() != traj.steps)
        throw std::invalid_argument("replay_step: trajectory lacks iterates or recorded randomness");
    const Vector& w = traj.iterates[i];
    Vector g;
    if (traj.method == "nso") {
        g = nso_estimate_from(objective, w, traj.perturbations[i], traj.noise[i]);
    } else {
        const Vector point = traj.perturbations[i].empty() ? w : w + traj.perturbations[i].front();
        g = objective.gradient(point);
        traj.noise[i].front().add_to(g);
    }
    Vector next = w;
    if (traj.mu) {
        Vector m = traj.momenta[i];
        m *= *traj.mu;
        m.axpy(-traj.etas[i], g);
        next += m;
    } else {
        next.axpy(-traj.etas[i], g);
    }
    return next;
}

}  // namespace nso
