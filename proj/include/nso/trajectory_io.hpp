#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nso/optimizers.hpp"

namespace nso {

/// Shortest text that parses back to the same double.
std::string format_real(double x);

/// Columns step,eta,f_value,grad_est_norm,query_count. The closing row for
/// W_T leaves eta and grad_est_norm empty.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

/// Everything needed to rebuild the iterates of a run without the objective:
/// W_0, the step sizes, the applied estimates G_i, mu and the streams used.
struct ReplayRecord {
    std::string method;
    std::uint64_t k = 0;
    std::optional<double> mu;
    Provenance provenance;
    Vector initial;
    std::vector<double> etas;
    std::vector<Vector> estimates;
};

ReplayRecord make_replay_record(const Trajectory& traj);
/// Little-endian binary: magic, version, lineage, then the arrays.
void write_replay(const std::filesystem::path& path, const ReplayRecord& rec);
ReplayRecord read_replay(const std::filesystem::path& path);
/// W_0..W_T rebuilt from the record with the same update rule as the run.
std::vector<Vector> replay_iterates(const ReplayRecord& rec);

}  // namespace nso
