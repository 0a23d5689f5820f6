#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

namespace nso {

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row);
    std::size_t column(const std::string& name) const;
    void write_csv(std::ostream& out) const;
};

/// Median/mean/std of one numeric column, optionally restricted to rows whose
/// `filter_column` equals `filter_value`. NaN cells are excluded.
struct Aggregate {
    std::string name;
    std::string table;
    std::string column;
    std::string filter_column;
    std::string filter_value;
    std::size_t count = 0;
    double median = 0.0;
    double mean = 0.0;
    double std = 0.0;
};

struct Verdict {
    enum class Op { LessEqual, GreaterEqual, Within };
    std::string name;
    double value = 0.0;
    Op op = Op::LessEqual;
    double lo = 0.0;
    double hi = 0.0;
    bool pass = false;

    bool evaluate() const;
};

class RunReport {
public:
    RunReport(std::string experiment, std::uint64_t seed) : experiment_(std::move(experiment)), seed_(seed) {}

    const std::string& experiment() const noexcept { return experiment_; }
    std::uint64_t seed() const noexcept { return seed_; }

    /// The first table added is the primary CSV output. References returned by
    /// the add_* methods stay valid as more entries are added.
    Table& add_table(std::string name, std::vector<std::string> columns);
    Table& table(const std::string& name);
    const Table& table(const std::string& name) const;
    const std::deque<Table>& tables() const noexcept { return tables_; }

    const Aggregate& add_aggregate(std::string name, std::string table, std::string column,
                                   std::string filter_column = {}, std::string filter_value = {});
    const Aggregate& aggregate(const std::string& name) const;
    const std::deque<Aggregate>& aggregates() const noexcept { return aggregates_; }

    void add_bound(std::string name, double value) { bounds_.emplace_back(std::move(name), value); }
    const std::vector<std::pair<std::string, double>>& bounds() const noexcept { return bounds_; }
    void add_info(std::string key, std::string value) { info_.emplace_back(std::move(key), std::move(value)); }

    const Verdict& check_le(std::string name, double value, double limit);
    const Verdict& check_ge(std::string name, double value, double limit);
    const Verdict& check_within(std::string name, double value, double lo, double hi);
    const std::deque<Verdict>& verdicts() const noexcept { return verdicts_; }
    bool passed() const;

    /// Recomputes every aggregate from the records and every verdict from its
    /// stored operands.
    bool self_consistent() const;

    nlohmann::ordered_json to_json() const;
    static RunReport from_json(const nlohmann::ordered_json& j);

    /// Primary table to `path`; further tables beside it as <stem>.<table>.csv.
    void write_csv(const std::filesystem::path& path) const;
    /// Human-readable summary (aggregates, bounds, verdicts).
    void write_summary(std::ostream& out) const;

private:
    Aggregate compute(const Aggregate& spec) const;
    Verdict& push(Verdict v);

    std::string experiment_;
    std::uint64_t seed_;
    std::deque<Table> tables_;
    std::deque<Aggregate> aggregates_;
    std::vector<std::pair<std::string, double>> bounds_;
    std::vector<std::pair<std::string, std::string>> info_;
    std::deque<Verdict> verdicts_;
};

/// Sample median (mean of the middle pair for even counts).
double median_of(std::vector<double> xs);

}  // namespace nso
