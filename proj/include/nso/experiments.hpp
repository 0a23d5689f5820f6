#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nso/config.hpp"
#include "nso/report.hpp"

namespace nso {

struct ExperimentRequest {
    std::uint64_t seed = 0;
    /// Larger problem sizes where an experiment has them (sensing only).
    bool full = false;
};

/// Each experiment reads its keys from `cfg`, rejects unknown ones with a
/// ConfigError, and is a pure function of (cfg, seed).
RunReport exp_matrix_sensing(const Config& cfg, const ExperimentRequest& req);
RunReport exp_taylor_check(const Config& cfg, const ExperimentRequest& req);
RunReport exp_rate_sweep(const Config& cfg, const ExperimentRequest& req);
RunReport exp_lower_bound(const Config& cfg, const ExperimentRequest& req);
RunReport exp_momentum_lb(const Config& cfg, const ExperimentRequest& req);
RunReport exp_convex_rate(const Config& cfg, const ExperimentRequest& req);

/// Names accepted by run_experiment: sensing, taylor, rate-sweep,
/// lower-bound, momentum-lb, convex-rate (underscores also accepted).
const std::vector<std::string>& experiment_names();
RunReport run_experiment(const std::string& name, const Config& cfg, const ExperimentRequest& req);

}  // namespace nso
