#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nso/oracles.hpp"
#include "nso/perturbation.hpp"
#include "nso/rng.hpp"
#include "nso/vector.hpp"

namespace nso {

class StepSchedule {
public:
    enum class Kind { Constant, Explicit };

    static StepSchedule constant(double eta);
    static StepSchedule explicit_steps(std::vector<double> etas);

    Kind kind() const noexcept { return kind_; }
    /// eta_i. Explicit schedules reject i past their length.
    double at(std::size_t i) const;
    /// Throws unless the schedule covers T steps.
    void require_length(std::size_t steps) const;
    /// Indices i < T with eta_i >= 1/C (the fixed-step analysis wants eta < 1/C).
    std::vector<std::size_t> steps_at_or_above(double inverse_c, std::size_t steps) const;
    double sum(std::size_t steps) const;

private:
    StepSchedule(Kind kind, std::vector<double> etas) : kind_(kind), etas_(std::move(etas)) {}
    Kind kind_;
    std::vector<double> etas_;
};

/// Raised when the objective value exceeds the divergence threshold or an
/// iterate stops being finite.
class Diverged : public std::runtime_error {
public:
    Diverged(std::size_t step, double value);
    std::size_t step() const noexcept { return step_; }
    double value() const noexcept { return value_; }

private:
    std::size_t step_;
    double value_;
};

struct RunOptions {
    /// Keep W_0..W_T. Off for long high-dimensional runs.
    bool keep_iterates = true;
    /// Keep the gradient estimates G_0..G_{T-1} (needed for binary replay).
    bool keep_estimates = false;
    /// Keep the perturbations and oracle noise of every step.
    bool keep_randomness = false;
    /// Diagnostics (objective value, divergence check) every this many steps;
    /// the final iterate is always recorded.
    std::size_t record_every = 1;
    double divergence_threshold = 1e12;
    /// Called with (step, W_step) whenever diagnostics are recorded, and for W_T.
    std::function<void(std::size_t, const Vector&)> observer;
};

struct StepRecord {
    std::size_t step = 0;
    /// eta_step; absent on the closing row for W_T.
    std::optional<double> eta;
    double f_value = 0.0;
    std::optional<double> grad_est_norm;
    /// Cumulative oracle queries once this step has been applied.
    std::uint64_t query_count = 0;
};

struct Provenance {
    std::uint64_t perturb_seed = 0;
    std::uint64_t perturb_stream = 0;
    std::uint64_t oracle_seed = 0;
    std::uint64_t oracle_stream = 0;
};

struct Trajectory {
    std::string method;
    std::size_t k = 0;
    std::optional<double> mu;
    std::size_t steps = 0;
    Provenance provenance;

    Vector initial;
    Vector final_iterate;
    std::vector<double> etas;
    std::vector<Vector> iterates;
    std::vector<StepRecord> records;
    std::vector<Vector> estimates;
    /// M_0..M_T when momentum is active.
    std::vector<Vector> momenta;
    std::vector<std::vector<Vector>> perturbations;
    std::vector<std::vector<OracleNoise>> noise;
    /// Running sum of W_1..W_T.
    Vector iterate_sum;
    std::uint64_t total_queries = 0;
};

/// NSO: W_{i+1} = W_i - eta_i G_i with G_i the k-pair two-point estimate.
/// With mu set, M_{i+1} = mu M_i - eta_i G_i and W_{i+1} = W_i + M_{i+1}, M_0 = 0.
Trajectory run_nso(GradOracle& oracle, const PerturbationDist& dist, const Vector& w0, const StepSchedule& schedule,
                   std::size_t k, std::size_t steps, std::optional<double> mu, RngStream& rng,
                   const RunOptions& options = {});

/// W_{i+1} = W_i - eta_i g(W_i + U_i), one perturbation and one query per step.
Trajectory run_wp_sgd(GradOracle& oracle, const PerturbationDist& dist, const Vector& w0,
                      const StepSchedule& schedule, std::size_t steps, RngStream& rng, const RunOptions& options = {});

/// W_{i+1} = W_i - eta_i g(W_i).
Trajectory run_sgd(GradOracle& oracle, const Vector& w0, const StepSchedule& schedule, std::size_t steps,
                   const RunOptions& options = {});

struct SelectedIterate {
    std::size_t index;
    Vector point;
};

/// t in {0..T-1} with Pr[t = j] = eta_j / sum eta; returns W_t, the iterate
/// before step t is applied.
std::size_t draw_iterate_index(const std::vector<double>& etas, RngStream& rng);
SelectedIterate select_random_iterate(const Trajectory& traj, RngStream& rng);

/// Mean of W_1..W_T (W_0 excluded).
Vector average_iterates(const Trajectory& traj);

/// Recomputes W_{i+1} from W_i, the recorded randomness, eta_i and M_i.
Vector replay_step(const Trajectory& traj, const Objective& objective, std::size_t i);

}  // namespace nso
