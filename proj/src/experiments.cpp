#include "nso/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "nso/analysis.hpp"
#include "nso/kernels.hpp"
#include "nso/objectives.hpp"
#include "nso/optimizers.hpp"
#include "nso/oracles.hpp"
#include "nso/sensing.hpp"
#include "nso/trajectory_io.hpp"

namespace nso {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Cell cell(double x) { return Cell{x}; }
Cell cell(std::size_t x) { return Cell{static_cast<std::int64_t>(x)}; }
Cell cell(std::string s) { return Cell{std::move(s)}; }

std::size_t positive_size(const Config& cfg, const std::string& key, std::int64_t fallback) {
    const std::int64_t v = cfg.get_int(key, fallback);
    if (v < 1) cfg.fail(key, "must be >= 1");
    return static_cast<std::size_t>(v);
}

double positive_real(const Config& cfg, const std::string& key, double fallback) {
    const double v = cfg.get_real(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) cfg.fail(key, "must be finite and > 0");
    return v;
}

double nonnegative_real(const Config& cfg, const std::string& key, double fallback) {
    const double v = cfg.get_real(key, fallback);
    if (!(v >= 0.0) || !std::isfinite(v)) cfg.fail(key, "must be finite and >= 0");
    return v;
}

std::vector<std::size_t> positive_sizes(const Config& cfg, const std::string& key,
                                        const std::vector<std::int64_t>& fallback) {
    const auto raw = cfg.get_ints(key, fallback);
    if (raw.empty()) cfg.fail(key, "must be non-empty");
    std::vector<std::size_t> out;
    for (auto v : raw) {
        if (v < 1) cfg.fail(key, "entries must be >= 1");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

PerturbationKind kind_key(const Config& cfg, const std::string& key, const std::string& fallback) {
    const std::string name = cfg.get_string(key, fallback);
    try {
        return parse_perturbation_kind(name);
    } catch (const std::invalid_argument& e) {
        cfg.fail(key, e.what());
    }
}

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return kNaN;
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

std::string cell_label(std::size_t k, std::size_t t) {
    return "k=" + std::to_string(k) + ",T=" + std::to_string(t);
}

double squared_pop_grad(const Objective& obj, const PerturbationDist& dist, const Vector& w) {
    const auto g = obj.population_gradient(w, dist);
    if (!g) throw std::logic_error(obj.name() + ": closed-form grad F unavailable at an iterate");
    return g->squared_norm();
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix sensing: GD, WP-GD and NSO from a common Gaussian initialization.

RunReport exp_matrix_sensing(const Config& cfg, const ExperimentRequest& req) {
    const std::size_t d = positive_size(cfg, "d", req.full ? 100 : 30);
    const std::size_t r = positive_size(cfg, "r", req.full ? 5 : 3);
    if (r > d) cfg.fail("r", "rank must not exceed d");
    const std::size_t n = positive_size(cfg, "n", static_cast<std::int64_t>(default_measurements(d, r)));
    const std::size_t reps = positive_size(cfg, "repetitions", 5);
    const std::size_t steps = positive_size(cfg, "steps", req.full ? 20000 : 60000);
    const std::size_t steps_gd = positive_size(cfg, "steps_gd", static_cast<std::int64_t>(steps));
    const std::size_t steps_wp = positive_size(cfg, "steps_wp", static_cast<std::int64_t>(steps));
    const std::size_t steps_nso = positive_size(cfg, "steps_nso", static_cast<std::int64_t>(steps));
    const double eta = positive_real(cfg, "eta", req.full ? 0.002 : 0.006);
    const double eta_gd = positive_real(cfg, "eta_gd", eta);
    const double eta_wp = positive_real(cfg, "eta_wp", eta);
    const double eta_nso = positive_real(cfg, "eta_nso", eta);
    const double sigma = nonnegative_real(cfg, "sigma", 0.01);
    const double sigma_wp = nonnegative_real(cfg, "sigma_wp", sigma);
    const std::size_t k = positive_size(cfg, "k", 1);
    const std::size_t holdout = positive_size(cfg, "validation", 1000);
    const std::size_t record_every = positive_size(cfg, "record_every", 1000);
    const double init_scale = positive_real(cfg, "init_scale", 1.0);
    const double train_target = positive_real(cfg, "train_target", 1e-6);
    const double nso_ratio = positive_real(cfg, "nso_ratio", 0.5);
    cfg.reject_unknown();

    const std::vector<std::string> methods = {"gd", "wp_gd", "nso"};
    struct Job {
        bool diverged = false;
        double train = kNaN;
        double val = kNaN;
        double trace = kNaN;
        double trace_formula = kNaN;
        std::vector<std::size_t> curve_steps;
        std::vector<double> curve_train;
        std::vector<double> curve_val;
    };
    std::vector<SensingInstance> instances(reps);
    std::vector<std::shared_ptr<const MeasurementSet>> validation(reps);
    std::vector<Vector> inits(reps);
    kernels::parallel::for_each_index(reps, [&](std::size_t rep) {
        instances[rep] = make_sensing_instance(d, r, n, derive_stream(req.seed, "sensing/instance", rep));
        validation[rep] = instances[rep].fresh_measurements(holdout, 0);
        RngStream init = derive_stream(req.seed, "sensing/init", rep);
        inits[rep] = Vector(d * d);
        for (double& x : inits[rep]) x = init_scale * init.normal();
    });

    std::vector<Job> jobs(reps * methods.size());
    kernels::parallel::for_each_index(jobs.size(), [&](std::size_t idx) {
        const std::size_t rep = idx / methods.size();
        const std::size_t m = idx % methods.size();
        auto objective = std::make_shared<const SensingObjective>(instances[rep].train);
        const SensingObjective val_obj(validation[rep]);
        GradOracle oracle = make_exact_oracle(objective);
        Job& job = jobs[idx];
        RunOptions opts;
        opts.keep_iterates = false;
        opts.record_every = record_every;
        opts.observer = [&](std::size_t step, const Vector& w) {
            job.curve_steps.push_back(step);
            job.curve_train.push_back(objective->mse(w));
            job.curve_val.push_back(val_obj.mse(w));
        };
        RngStream perturb = derive_stream(req.seed, "sensing/perturb", idx);
        try {
            Trajectory traj;
            if (methods[m] == "gd") {
                traj = run_sgd(oracle, inits[rep], StepSchedule::constant(eta_gd), steps_gd, opts);
            } else if (methods[m] == "wp_gd") {
                traj = run_wp_sgd(oracle, PerturbationDist::gaussian(sigma_wp, d * d), inits[rep],
                                  StepSchedule::constant(eta_wp), steps_wp, perturb, opts);
            } else {
                traj = run_nso(oracle, PerturbationDist::gaussian(sigma, d * d), inits[rep],
                               StepSchedule::constant(eta_nso), k, steps_nso, std::nullopt, perturb, opts);
            }
            job.train = objective->mse(traj.final_iterate);
            job.val = val_obj.mse(traj.final_iterate);
            job.trace = objective->hessian_trace(traj.final_iterate);
            job.trace_formula = sensing_trace_formula(*instances[rep].train, traj.final_iterate);
        } catch (const Diverged&) {
            job.diverged = true;
        }
    });

    RunReport rep(std::string("sensing"), req.seed);
    rep.add_info("d", std::to_string(d));
    rep.add_info("r", std::to_string(r));
    rep.add_info("n", std::to_string(n));
    rep.add_info("steps_gd", std::to_string(steps_gd));
    rep.add_info("steps_wp_gd", std::to_string(steps_wp));
    rep.add_info("steps_nso", std::to_string(steps_nso));
    Table& final_table = rep.add_table(
        "final", {"rep", "method", "diverged", "train_mse", "val_mse", "hessian_trace", "trace_formula"});
    Table& curves = rep.add_table("curves", {"rep", "method", "step", "train_mse", "val_mse"});
    std::size_t diverged = 0;
    for (std::size_t idx = 0; idx < jobs.size(); ++idx) {
        const Job& job = jobs[idx];
        const std::size_t r_idx = idx / methods.size();
        const std::string& method = methods[idx % methods.size()];
        diverged += job.diverged ? 1 : 0;
        final_table.add_row({cell(r_idx), cell(method), cell(std::size_t{job.diverged ? 1u : 0u}), cell(job.train),
                             cell(job.val), cell(job.trace), cell(job.trace_formula)});
        for (std::size_t i = 0; i < job.curve_steps.size(); ++i)
            curves.add_row({cell(r_idx), cell(method), cell(job.curve_steps[i]), cell(job.curve_train[i]),
                            cell(job.curve_val[i])});
    }
    rep.add_info("diverged_runs", std::to_string(diverged));
    for (const auto& m : methods) {
        rep.add_aggregate("train_" + m, "final", "train_mse", "method", m);
        rep.add_aggregate("val_" + m, "final", "val_mse", "method", m);
        rep.add_aggregate("trace_" + m, "final", "hessian_trace", "method", m);
    }
    // Every GD seed must interpolate; diverged runs count as failures here.
    double gd_worst = 0.0;
    for (std::size_t rep_i = 0; rep_i < reps; ++rep_i) {
        const double t = jobs[rep_i * methods.size()].train;
        gd_worst = std::isnan(t) ? kInf : std::max(gd_worst, t);
    }
    const double val_gd = rep.aggregate("val_gd").median;
    const double val_wp = rep.aggregate("val_wp_gd").median;
    const double val_nso = rep.aggregate("val_nso").median;
    rep.check_le("gd_final_train_mse_max", gd_worst, train_target);
    rep.check_ge("median_val_gd_over_wp_gd", val_gd / val_wp, 1.0);
    rep.check_ge("median_val_wp_gd_over_nso", val_wp / val_nso, 1.0);
    rep.check_le("median_val_nso_over_gd", val_nso / val_gd, nso_ratio);
    return rep;
}

// ---------------------------------------------------------------------------
// Taylor gap F - f against (sigma^2 / 2) tr H.

RunReport exp_taylor_check(const Config& cfg, const ExperimentRequest& req) {
    const std::string objective_name = cfg.get_string("objective", "quartic");
    const std::size_t d = positive_size(cfg, "d", 10);
    const double point = cfg.get_real("point", 1.0);
    std::vector<double> default_grid;
    for (int i = 0; i <= 10; ++i) default_grid.push_back(0.02 + 0.018 * i);
    const auto sigmas = cfg.get_reals("sigmas", default_grid);
    if (sigmas.empty()) cfg.fail("sigmas", "grid must be non-empty");
    for (double s : sigmas)
        if (!(s > 0.0)) cfg.fail("sigmas", "entries must be > 0");
    const std::size_t m = positive_size(cfg, "samples", 100000);
    const PerturbationKind kind = kind_key(cfg, "distribution", "gaussian");
    const bool cv = cfg.get_bool("control_variate", true);
    const bool crn = cfg.get_bool("common_random_numbers", true);
    const double rss_max = positive_real(cfg, "rss_threshold", 0.03);
    const double slope_min = cfg.get_real("slope_threshold", 2.5);
    const double curvature = positive_real(cfg, "C", 1.0);
    const std::size_t sensing_r = positive_size(cfg, "sensing_r", 1);
    const std::size_t sensing_n =
        positive_size(cfg, "sensing_n", static_cast<std::int64_t>(default_measurements(d, sensing_r)));
    cfg.reject_unknown();

    ObjectivePtr obj;
    Vector w;
    if (objective_name == "quartic") {
        obj = make_quartic(d);
        w = Vector(d, point);
    } else if (objective_name == "quadratic") {
        obj = make_quadratic(curvature, d);
        w = Vector(d, point);
    } else if (objective_name == "sensing") {
        if (sensing_r > d) cfg.fail("sensing_r", "rank must not exceed d");
        auto ms = make_matrix_sensing(d, sensing_r, sensing_n, derive_stream(req.seed, "taylor/instance", 0));
        w = ms.instance.padded_truth();
        obj = ms.objective;
    } else {
        cfg.fail("objective", "expected quartic, quadratic or sensing");
    }

    TaylorOptions opts;
    opts.control_variate = cv;
    const auto report = taylor_report(*obj, w, kind, sigmas, m, derive_stream(req.seed, "taylor/pairs", 0), opts, crn);

    RunReport rep("taylor", req.seed);
    rep.add_info("objective", objective_name);
    rep.add_info("samples", std::to_string(m));
    Table& t = rep.add_table("taylor", {"sigma", "measured", "std_err", "predicted"});
    for (const auto& p : report.points)
        t.add_row({cell(p.sigma), cell(p.measured), cell(p.std_err), cell(p.predicted)});
    const double rss = report.relative_rss();
    rep.add_bound("relative_rss", rss);
    rep.check_le("relative_rss", rss, rss_max);
    if (objective_name != "quadratic") {
        const double slope = report.remainder_slope();
        rep.add_bound("remainder_slope", slope);
        rep.check_ge("remainder_loglog_slope", slope, slope_min);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Random-iterate rate on the quadratic under isotropic oracle noise.

RunReport exp_rate_sweep(const Config& cfg, const ExperimentRequest& req) {
    const double c = positive_real(cfg, "C", 1.0);
    const double dd = positive_real(cfg, "D", 1.0);
    const double sigma = nonnegative_real(cfg, "sigma", 1.0);
    const double sigma_p = nonnegative_real(cfg, "sigma_p", 0.01);
    const std::size_t d = positive_size(cfg, "d", 100);
    const auto ks = positive_sizes(cfg, "k", {1, 4});
    const auto ts = positive_sizes(cfg, "T", {16, 64, 256});
    const std::size_t reps = positive_size(cfg, "repetitions", 200);
    const PerturbationKind kind = kind_key(cfg, "distribution", "gaussian");
    const double slope_lo = cfg.get_real("slope_min", -0.65);
    const double slope_hi = cfg.get_real("slope_max", -0.35);
    cfg.reject_unknown();

    auto obj = make_quadratic(c, d);
    const PerturbationDist dist(kind, sigma_p, d);
    Vector w0 = Vector::basis(d, 0);
    w0 *= dd * std::sqrt(2.0 / c);

    struct Cell_ {
        std::size_t k, t;
        double eta, rhs;
    };
    std::vector<Cell_> cells;
    for (auto k : ks)
        for (auto t : ts) {
            BoundInputs b{c, dd, sigma, dist.h_moment(), static_cast<double>(k), static_cast<double>(t)};
            cells.push_back({k, t, optimal_eta(b), theorem1_rhs(b)});
        }

    struct Rec {
        std::size_t selected = 0;
        double selected_sq = 0.0;
        double weighted_sq = 0.0;
    };
    std::vector<Rec> recs(cells.size() * reps);
    kernels::parallel::for_each_index(recs.size(), [&](std::size_t idx) {
        const Cell_& cl = cells[idx / reps];
        GradOracle oracle(obj, NoiseModel::isotropic(sigma), derive_stream(req.seed, "rate_sweep/oracle", idx));
        RngStream perturb = derive_stream(req.seed, "rate_sweep/perturb", idx);
        RngStream pick = derive_stream(req.seed, "rate_sweep/select", idx);
        const auto traj =
            run_nso(oracle, dist, w0, StepSchedule::constant(cl.eta), cl.k, cl.t, std::nullopt, perturb);
        const auto sel = select_random_iterate(traj, pick);
        Rec& r = recs[idx];
        r.selected = sel.index;
        r.selected_sq = squared_pop_grad(*obj, dist, sel.point);
        // Expectation over the random index given this run.
        const double total = std::accumulate(traj.etas.begin(), traj.etas.end(), 0.0);
        double s = 0.0;
        for (std::size_t t = 0; t < cl.t; ++t) s += traj.etas[t] / total * squared_pop_grad(*obj, dist, traj.iterates[t]);
        r.weighted_sq = s;
    });

    RunReport rep("rate_sweep", req.seed);
    Table& t = rep.add_table("runs", {"cell", "k", "T", "rep", "eta", "selected_t", "sq_grad_selected", "sq_grad_expected"});
    for (std::size_t idx = 0; idx < recs.size(); ++idx) {
        const Cell_& cl = cells[idx / reps];
        t.add_row({cell(cell_label(cl.k, cl.t)), cell(cl.k), cell(cl.t), cell(idx % reps), cell(cl.eta),
                   cell(recs[idx].selected), cell(recs[idx].selected_sq), cell(recs[idx].weighted_sq)});
    }
    Table& summary = rep.add_table("cells", {"k", "T", "eta", "mean_sq_grad", "std_err", "mean_sq_grad_selected", "theorem1_rhs"});
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const Cell_& cl = cells[ci];
        const std::string label = cell_label(cl.k, cl.t);
        const auto& agg = rep.add_aggregate("expected_" + label, "runs", "sq_grad_expected", "cell", label);
        const auto& sel = rep.add_aggregate("selected_" + label, "runs", "sq_grad_selected", "cell", label);
        summary.add_row({cell(cl.k), cell(cl.t), cell(cl.eta), cell(agg.mean),
                         cell(agg.std / std::sqrt(static_cast<double>(agg.count))), cell(sel.mean), cell(cl.rhs)});
        rep.add_bound("theorem1_rhs_" + label, cl.rhs);
        rep.check_le("mean_sq_grad_le_rhs_" + label, agg.mean, cl.rhs);
        if (sigma == 0.0 && sigma_p == 0.0) {
            const double noiseless = 2.0 * c * dd * dd / static_cast<double>(cl.t);
            rep.check_le("noiseless_le_2CD2_over_T_" + label, agg.mean, noiseless);
        }
    }
    if (ts.size() >= 2 && sigma > 0.0) {
        for (auto k : ks) {
            std::vector<double> x;
            std::vector<double> y;
            for (auto tt : ts) {
                x.push_back(static_cast<double>(tt));
                y.push_back(rep.aggregate("expected_" + cell_label(k, tt)).mean);
            }
            const double slope = loglog_slope(x, y);
            rep.add_bound("slope_k=" + std::to_string(k), slope);
            rep.check_within("decay_slope_k=" + std::to_string(k), slope, slope_lo, slope_hi);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Lower-bound instances.

namespace {

struct Regime1Cell {
    std::size_t k, t;
    double eta, g, bound;
};

void lower_bound_regime1(const Config& cfg, const ExperimentRequest& req, RunReport& rep) {
    const double c = positive_real(cfg, "C", 1.0);
    const double dd = positive_real(cfg, "D", 1.0);
    const double sigma = positive_real(cfg, "sigma", 1.0);
    const auto ks = positive_sizes(cfg, "k", {1, 4});
    const auto ts = positive_sizes(cfg, "T", {8, 16, 32});
    const std::size_t reps = positive_size(cfg, "repetitions", 50);
    const double sigma_p = nonnegative_real(cfg, "sigma_p", 1.0);
    const bool has_eta = cfg.has("eta");
    const double eta_cfg = has_eta ? positive_real(cfg, "eta", 1.0) : 0.0;
    const std::int64_t extra_dims = cfg.get_int("extra_dims", 0);
    if (extra_dims < 0) cfg.fail("extra_dims", "must be >= 0");

    std::vector<Regime1Cell> cells;
    for (auto k : ks)
        for (auto t : ts) {
            const double kd = static_cast<double>(k);
            const double td = static_cast<double>(t);
            // sum eta_i <= sqrt(D^2 k T / (2 sigma^2 C)) for a constant step.
            const double eta_max = std::sqrt(dd * dd * kd / (2.0 * sigma * sigma * c * td));
            const double eta = has_eta ? eta_cfg : std::min(1.0 / c, eta_max);
            if (eta * td > std::sqrt(dd * dd * kd * td / (2.0 * sigma * sigma * c)) * (1.0 + 1e-12))
                cfg.fail("eta", "violates the regime-1 step-size condition for " + cell_label(k, t));
            const double g = std::max(1.0 / c, 2.0 * eta * td);
            BoundInputs b{c, dd, sigma, 0.0, kd, td};
            cells.push_back({k, t, eta, g, theorem2_rhs(b)});
        }

    struct Rec {
        double min_sq = kInf;
        std::size_t argmin = 0;
        std::size_t flat_violations = 0;
        std::size_t chain_motion = 0;
    };
    std::vector<Rec> recs(cells.size() * reps);
    kernels::parallel::for_each_index(recs.size(), [&](std::size_t idx) {
        const Regime1Cell& cl = cells[idx / reps];
        const std::size_t d = cl.t + 1 + static_cast<std::size_t>(extra_dims);
        const double cap = cl.eta * sigma / std::sqrt(static_cast<double>(cl.k));
        HardChainSpec spec;
        spec.c = c;
        spec.g = cl.g;
        spec.dim = d;
        spec.alphas.assign(cl.t, 2.0 * cap);
        auto obj = std::make_shared<const HardChain>(spec);
        std::vector<double> caps(d, kInf);
        for (std::size_t i = 0; i < cl.t; ++i) caps[i + 1] = cap;
        const auto dist = PerturbationDist::truncated(sigma_p, caps);
        Vector w0 = Vector::basis(d, 0);
        w0 *= dd * std::sqrt(cl.g);
        GradOracle oracle(obj, NoiseModel::coordinate_adversarial(cap),
                          derive_stream(req.seed, "lower_bound/r1/oracle", idx));
        RngStream perturb = derive_stream(req.seed, "lower_bound/r1/perturb", idx);
        const auto traj = run_nso(oracle, dist, w0, StepSchedule::constant(cl.eta), cl.k, cl.t, std::nullopt, perturb);
        Rec& r = recs[idx];
        for (std::size_t t = 0; t <= cl.t; ++t) {
            const Vector& w = traj.iterates[t];
            for (std::size_t i = 0; i < cl.t; ++i) {
                if (!obj->in_flat_region(w, i, caps[i + 1])) ++r.flat_violations;
                if (obj->gradient(w)[i + 1] != 0.0) ++r.chain_motion;
            }
            const auto pg = obj->population_gradient(w, dist);
            // Outside the flat region fall back to the plain gradient's leading term.
            const double sq = pg ? pg->squared_norm() : (w[0] / cl.g) * (w[0] / cl.g);
            if (sq < r.min_sq) {
                r.min_sq = sq;
                r.argmin = t;
            }
        }
    });

    Table& t = rep.add_table("regime1", {"cell", "k", "T", "rep", "eta", "G", "min_sq_grad", "argmin_t", "bound",
                                         "flat_violations", "chain_gradient_nonzero"});
    std::size_t violations = 0;
    std::size_t flat = 0;
    std::size_t motion = 0;
    for (std::size_t idx = 0; idx < recs.size(); ++idx) {
        const Regime1Cell& cl = cells[idx / reps];
        const Rec& r = recs[idx];
        violations += r.min_sq >= cl.bound ? 0 : 1;
        flat += r.flat_violations;
        motion += r.chain_motion;
        t.add_row({cell(cell_label(cl.k, cl.t)), cell(cl.k), cell(cl.t), cell(idx % reps), cell(cl.eta), cell(cl.g),
                   cell(r.min_sq), cell(r.argmin), cell(cl.bound), cell(r.flat_violations), cell(r.chain_motion)});
    }
    for (const auto& cl : cells) {
        rep.add_bound("theorem2_rhs_" + cell_label(cl.k, cl.t), cl.bound);
        rep.add_aggregate("r1_min_sq_grad_" + cell_label(cl.k, cl.t), "regime1", "min_sq_grad", "cell",
                          cell_label(cl.k, cl.t));
    }
    rep.check_le("regime1_runs_below_bound", static_cast<double>(violations), 0.0);
    rep.check_le("regime1_flat_branch_exits", static_cast<double>(flat), 0.0);
    rep.check_le("regime1_chain_gradient_nonzero", static_cast<double>(motion), 0.0);
}

void lower_bound_regime2(const Config& cfg, const ExperimentRequest& req, RunReport& rep) {
    const double c = positive_real(cfg, "regime2.C", 1.0);
    const double dd = positive_real(cfg, "regime2.D", 1.0);
    const double sigma = positive_real(cfg, "regime2.sigma", 1.0);
    const std::size_t k = positive_size(cfg, "regime2.k", 1);
    const std::size_t steps = positive_size(cfg, "regime2.T", 16);
    const std::size_t reps = positive_size(cfg, "regime2.repetitions", 200);
    const double sigma_p = nonnegative_real(cfg, "regime2.sigma_p", 1.0);
    const double kd = static_cast<double>(k);
    const double td = static_cast<double>(steps);
    const double eta_min = std::sqrt(dd * dd * kd / (2.0 * sigma * sigma * c * td));
    const double eta = positive_real(cfg, "regime2.eta", std::min(2.0 * eta_min, 0.5 * (eta_min + 1.0 / c)));
    if (eta < eta_min * (1.0 - 1e-12) || eta >= 1.0 / c)
        cfg.fail("regime2.eta", "regime 2 needs sqrt(D^2 k / (2 sigma^2 C T)) <= eta < 1/C");
    const std::size_t d = steps + 1;

    const double rho = c * eta;
    const double geo = (1.0 - std::pow(rho, td)) / (1.0 - rho);
    const double c_const = std::sqrt(dd * dd * (1.0 - rho) * (1.0 - rho) /
                                     (2.0 * sigma * sigma * rho * rho * (1.0 - std::pow(rho, td)) *
                                      (1.0 - std::pow(rho, td))));
    const double cap0 = c_const * eta * sigma;
    const double alpha = geo * 2.0 * c_const * eta * sigma;
    auto obj = std::make_shared<const ChainG>(c, alpha, d);
    std::vector<double> caps(d, kInf);
    caps[0] = cap0;
    const auto dist = PerturbationDist::truncated(sigma_p, caps);
    Vector w0(d);
    for (std::size_t j = 1; j < d; ++j) w0[j] = std::sqrt(dd * dd / (c * static_cast<double>(d - 1)));

    std::vector<std::vector<double>> sq(reps, std::vector<double>(steps + 1));
    kernels::parallel::for_each_index(reps, [&](std::size_t rep_i) {
        GradOracle oracle(obj, NoiseModel::coordinate_adversarial(sigma),
                          derive_stream(req.seed, "lower_bound/r2/oracle", rep_i));
        RngStream perturb = derive_stream(req.seed, "lower_bound/r2/perturb", rep_i);
        const auto traj = run_nso(oracle, dist, w0, StepSchedule::constant(eta), k, steps, std::nullopt, perturb);
        for (std::size_t t = 0; t <= steps; ++t) sq[rep_i][t] = squared_pop_grad(*obj, dist, traj.iterates[t]);
    });

    Table& t = rep.add_table("regime2", {"t", "mean_sq_grad", "std_err"});
    double min_mean = kInf;
    for (std::size_t s = 0; s <= steps; ++s) {
        double mean = 0.0;
        for (const auto& row : sq) mean += row[s];
        mean /= static_cast<double>(reps);
        double ss = 0.0;
        for (const auto& row : sq) ss += (row[s] - mean) * (row[s] - mean);
        const double se = reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps)) : 0.0;
        t.add_row({cell(s), cell(mean), cell(se)});
        min_mean = std::min(min_mean, mean);
    }
    BoundInputs b{c, dd, sigma, 0.0, kd, td};
    const double bound = theorem2_rhs(b);
    rep.add_bound("regime2_theorem2_rhs", bound);
    rep.add_bound("regime2_eta", eta);
    rep.add_bound("regime2_alpha", alpha);
    rep.add_bound("regime2_c", c_const);
    rep.check_ge("regime2_min_mean_sq_grad", min_mean, bound);
}

}  // namespace

RunReport exp_lower_bound(const Config& cfg, const ExperimentRequest& req) {
    const std::string regime = cfg.get_string("regime", "both");
    if (regime != "both" && regime != "1" && regime != "2") cfg.fail("regime", "expected \"1\", \"2\" or \"both\"");
    RunReport rep("lower_bound", req.seed);
    if (regime != "2") lower_bound_regime1(cfg, req, rep);
    if (regime != "1") lower_bound_regime2(cfg, req, rep);
    cfg.reject_unknown();
    return rep;
}

// ---------------------------------------------------------------------------
// Momentum on the quadratic with coordinate-bounded noise.

RunReport exp_momentum_lb(const Config& cfg, const ExperimentRequest& req) {
    const double c = positive_real(cfg, "C", 1.0);
    const double dd = positive_real(cfg, "D", 1.0);
    const double sigma = nonnegative_real(cfg, "sigma", 1.0);
    const std::size_t k = positive_size(cfg, "k", 2);
    const std::size_t steps = positive_size(cfg, "T", 32);
    const double eta = positive_real(cfg, "eta", 0.2);
    const auto mus = cfg.get_reals("mu", {0.0, 0.5, 0.9});
    for (double mu : mus)
        if (!(mu >= 0.0 && mu < 1.0)) cfg.fail("mu", "entries must lie in [0, 1)");
    const std::size_t reps = positive_size(cfg, "repetitions", 2000);
    const double sigma_p = nonnegative_real(cfg, "sigma_p", 0.1);
    const double lower_constant = positive_real(cfg, "lower_constant", 1.0 / std::sqrt(32.0));
    const double closed_form_tol = positive_real(cfg, "closed_form_tol", 1e-10);
    cfg.reject_unknown();

    const std::size_t d = steps + 1;
    auto obj = make_quadratic(c, d);
    const auto dist = PerturbationDist::gaussian(sigma_p, d);
    Vector w0 = Vector::basis(d, 0);
    w0 *= dd * std::sqrt(2.0 / c);
    const std::vector<double> etas(steps, eta);
    const double kd = static_cast<double>(k);
    const double scale = w0.norm();

    RunReport rep("momentum_lb", req.seed);
    Table& curve = rep.add_table("curve", {"mu", "t", "empirical", "std_err", "closed_form", "recursion"});
    Table& runs = rep.add_table("runs", {"mu", "rep", "time_avg_sq_grad", "final_sq_grad", "closed_form_error"});
    const BoundInputs b{c, dd, sigma, 0.0, kd, static_cast<double>(steps)};
    const double lower = momentum_lower_order(b, lower_constant);
    rep.add_bound("lower_order", lower);

    for (std::size_t mi = 0; mi < mus.size(); ++mi) {
        const double mu = mus[mi];
        std::vector<std::vector<double>> sq(reps, std::vector<double>(steps + 1));
        std::vector<double> cf_error(reps, 0.0);
        kernels::parallel::for_each_index(reps, [&](std::size_t rep_i) {
            const std::size_t idx = mi * reps + rep_i;
            GradOracle oracle(obj, NoiseModel::coordinate_adversarial(sigma),
                              derive_stream(req.seed, "momentum/oracle", idx));
            RngStream perturb = derive_stream(req.seed, "momentum/perturb", idx);
            RunOptions opts;
            opts.keep_randomness = true;
            const auto traj =
                run_nso(oracle, dist, w0, StepSchedule::constant(eta), k, steps, mu, perturb, opts);
            for (std::size_t t = 0; t <= steps; ++t) sq[rep_i][t] = squared_pop_grad(*obj, dist, traj.iterates[t]);
            // Matrix-power closed form per coordinate; coordinate j only sees the noise of step j - 1.
            double err = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                std::vector<double> xi(steps, 0.0);
                if (j >= 1) {
                    double avg = 0.0;
                    for (const auto& z : traj.noise[j - 1]) avg += z.value;
                    xi[j - 1] = avg / kd;
                }
                const auto states = momentum_closed_form(c, eta, mu, w0[j], xi);
                for (std::size_t t = 0; t <= steps; ++t) {
                    err = std::max(err, std::abs(states[t][0] - traj.iterates[t][j]) / scale);
                    err = std::max(err, std::abs(states[t][1] - traj.momenta[t][j]) / scale);
                }
            }
            cf_error[rep_i] = err;
        });

        const auto recursion = momentum_expected_sq_grad(c, dd, sigma, kd, mu, etas);
        const auto closed = mu == 0.0 ? quadratic_expected_sq_grad(c, dd, sigma, kd, etas) : recursion;
        const std::string mu_s = format_real(mu);
        double min_cf = kInf;
        for (std::size_t t = 0; t <= steps; ++t) {
            double mean = 0.0;
            for (const auto& row : sq) mean += row[t];
            mean /= static_cast<double>(reps);
            double ss = 0.0;
            for (const auto& row : sq) ss += (row[t] - mean) * (row[t] - mean);
            const double se = std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps));
            curve.add_row({cell(mu), cell(t), cell(mean), cell(se), cell(closed[t]), cell(recursion[t])});
            min_cf = std::min(min_cf, closed[t]);
        }
        double cf_time_avg = 0.0;
        for (double v : closed) cf_time_avg += v;
        cf_time_avg /= static_cast<double>(closed.size());
        for (std::size_t rep_i = 0; rep_i < reps; ++rep_i) {
            double avg = 0.0;
            for (double v : sq[rep_i]) avg += v;
            avg /= static_cast<double>(steps + 1);
            runs.add_row({cell(mu_s), cell(rep_i), cell(avg), cell(sq[rep_i][steps]), cell(cf_error[rep_i])});
        }
        const auto& avg_agg = rep.add_aggregate("time_avg_mu=" + mu_s, "runs", "time_avg_sq_grad", "mu", mu_s);
        const auto& fin_agg = rep.add_aggregate("final_mu=" + mu_s, "runs", "final_sq_grad", "mu", mu_s);
        const auto& err_agg = rep.add_aggregate("closed_form_error_mu=" + mu_s, "runs", "closed_form_error", "mu", mu_s);
        double worst = 0.0;
        for (double e : cf_error) worst = std::max(worst, e);
        rep.check_le("matrix_power_max_rel_error_mu=" + mu_s, worst, closed_form_tol);
        (void)err_agg;
        if (mu == 0.0) {
            // |empirical - closed form| in units of the empirical standard error,
            // with a rounding floor for noise-free configurations.
            auto z_score = [&](const Aggregate& agg, double target) {
                const double se = agg.std / std::sqrt(static_cast<double>(agg.count));
                const double floor = 1e-12 * std::max(1.0, std::abs(target));
                return std::abs(agg.mean - target) / std::max(se, floor);
            };
            rep.check_le("closed_form_time_avg_z_mu=0", z_score(avg_agg, cf_time_avg), 3.0);
            rep.check_le("closed_form_final_z_mu=0", z_score(fin_agg, closed[steps]), 3.0);
        }
        rep.add_bound("min_closed_form_mu=" + mu_s, min_cf);
        rep.check_ge("min_expected_sq_grad_mu=" + mu_s, min_cf, lower);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Averaged iterate on the convex benchmark.

RunReport exp_convex_rate(const Config& cfg, const ExperimentRequest& req) {
    const std::size_t d = positive_size(cfg, "d", 10);
    const double radius = positive_real(cfg, "R", 1.0);
    const double gbound = positive_real(cfg, "G", 1.0);
    const auto ts = positive_sizes(cfg, "T", {25, 100, 400, 1600});
    // Narrow smoothing and Huber width keep the averaged iterate on the linear
    // branch, where the gap decays like 1/sqrt(T) rather than 1/T.
    const double sigma_p = nonnegative_real(cfg, "sigma_p", 1e-3);
    const double huber_width = positive_real(cfg, "huber_width", 1e-3 * radius);
    const std::size_t reps = positive_size(cfg, "repetitions", 10);
    const std::size_t m = positive_size(cfg, "samples", 4000);
    const double start_fraction = nonnegative_real(cfg, "start_fraction", 1.0);
    if (start_fraction > 1.0) cfg.fail("start_fraction", "W0 must lie in the radius-R ball");
    const double slope_lo = cfg.get_real("slope_min", -0.65);
    const double slope_hi = cfg.get_real("slope_max", -0.35);
    cfg.reject_unknown();

    auto obj = make_smooth_convex_bench(d, radius, gbound, huber_width);
    const auto dist = PerturbationDist::gaussian(sigma_p, d);
    const Vector w0(d, start_fraction * radius / std::sqrt(static_cast<double>(d)));
    const Vector minimizer(d);

    std::vector<double> gaps(ts.size() * reps);
    kernels::parallel::for_each_index(gaps.size(), [&](std::size_t idx) {
        const std::size_t steps = ts[idx / reps];
        const auto cb = convex_bound(radius, gbound, static_cast<double>(steps));
        GradOracle oracle = make_exact_oracle(obj);
        RngStream perturb = derive_stream(req.seed, "convex/perturb", idx);
        RunOptions opts;
        opts.keep_iterates = false;
        const auto traj =
            run_nso(oracle, dist, w0, StepSchedule::constant(cb.eta), 1, steps, std::nullopt, perturb, opts);
        const Vector avg = average_iterates(traj);
        gaps[idx] = population_gap(*obj, dist, avg, minimizer, m, derive_stream(req.seed, "convex/value", idx)).value;
    });

    RunReport rep("convex_rate", req.seed);
    Table& t = rep.add_table("runs", {"T", "rep", "eta", "gap", "bound"});
    for (std::size_t idx = 0; idx < gaps.size(); ++idx) {
        const std::size_t steps = ts[idx / reps];
        const auto cb = convex_bound(radius, gbound, static_cast<double>(steps));
        t.add_row({cell(steps), cell(idx % reps), cell(cb.eta), cell(gaps[idx]), cell(cb.bound)});
    }
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
        const std::size_t steps = ts[ti];
        const auto cb = convex_bound(radius, gbound, static_cast<double>(steps));
        const auto& agg = rep.add_aggregate("gap_T=" + std::to_string(steps), "runs", "gap", "T", std::to_string(steps));
        double worst = -kInf;
        for (std::size_t r = 0; r < reps; ++r) {
            const std::size_t idx = ti * reps + r;
            worst = std::max(worst, gaps[idx]);
        }
        rep.add_bound("convex_bound_T=" + std::to_string(steps), cb.bound);
        rep.check_le("max_gap_le_bound_T=" + std::to_string(steps), worst, cb.bound);
        xs.push_back(static_cast<double>(steps));
        ys.push_back(agg.mean);
    }
    if (xs.size() >= 2 && start_fraction > 0.0) {
        const double slope = loglog_slope(xs, ys);
        rep.add_bound("gap_decay_exponent", slope);
        rep.check_within("gap_decay_exponent", slope, slope_lo, slope_hi);
    }
    return rep;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"sensing",     "taylor",      "rate-sweep",
                                                   "lower-bound", "momentum-lb", "convex-rate"};
    return names;
}

RunReport run_experiment(const std::string& name, const Config& cfg, const ExperimentRequest& req) {
    std::string key = name;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "sensing" || key == "matrix-sensing") return exp_matrix_sensing(cfg, req);
    if (key == "taylor") return exp_taylor_check(cfg, req);
    if (key == "rate-sweep") return exp_rate_sweep(cfg, req);
    if (key == "lower-bound") return exp_lower_bound(cfg, req);
    if (key == "momentum-lb") return exp_momentum_lb(cfg, req);
    if (key == "convex-rate") return exp_convex_rate(cfg, req);
    throw std::invalid_argument("unknown experiment '" + name + "'");
}

}  // namespace nso
