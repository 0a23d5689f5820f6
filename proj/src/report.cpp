#include "nso/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "nso/trajectory_io.hpp"

namespace nso {

void Table::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size())
        throw std::invalid_argument("table " + name + ": row has " + std::to_string(row.size()) + " cells, expected " +
                                    std::to_string(columns.size()));
    rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& col) const {
    const auto it = std::find(columns.begin(), columns.end(), col);
    if (it == columns.end()) throw std::invalid_argument("table " + name + ": no column '" + col + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

namespace {

std::string cell_text(const Cell& c) {
    if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&c)) return format_real(*d);
    return std::get<std::string>(c);
}

double cell_number(const Cell& c) {
    if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&c)) return *d;
    return std::numeric_limits<double>::quiet_NaN();
}

nlohmann::ordered_json real_json(double x) {
    if (!std::isfinite(x)) return nullptr;
    return x;
}

double json_real(const nlohmann::ordered_json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

const char* op_name(Verdict::Op op) {
    switch (op) {
        case Verdict::Op::LessEqual: return "<=";
        case Verdict::Op::GreaterEqual: return ">=";
        case Verdict::Op::Within: return "in";
    }
    return "?";
}

Verdict::Op op_from(const std::string& s) {
    if (s == "<=") return Verdict::Op::LessEqual;
    if (s == ">=") return Verdict::Op::GreaterEqual;
    if (s == "in") return Verdict::Op::Within;
    throw std::invalid_argument("unknown verdict operator '" + s + "'");
}

}  // namespace

void Table::write_csv(std::ostream& out) const {
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell_text(row[i]);
        out << '\n';
    }
}

bool Verdict::evaluate() const {
    switch (op) {
        case Op::LessEqual: return value <= hi;
        case Op::GreaterEqual: return value >= lo;
        case Op::Within: return value >= lo && value <= hi;
    }
    return false;
}

double median_of(std::vector<double> xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

Table& RunReport::add_table(std::string name, std::vector<std::string> columns) {
    for (const auto& t : tables_)
        if (t.name == name) throw std::invalid_argument("duplicate table " + name);
    tables_.push_back(Table{std::move(name), std::move(columns), {}});
    return tables_.back();
}

Table& RunReport::table(const std::string& name) {
    for (auto& t : tables_)
        if (t.name == name) return t;
    throw std::invalid_argument("no table " + name);
}

const Table& RunReport::table(const std::string& name) const {
    for (const auto& t : tables_)
        if (t.name == name) return t;
    throw std::invalid_argument("no table " + name);
}

Aggregate RunReport::compute(const Aggregate& spec) const {
    const Table& t = table(spec.table);
    const std::size_t col = t.column(spec.column);
    const std::size_t filter = spec.filter_column.empty() ? 0 : t.column(spec.filter_column);
    std::vector<double> xs;
    for (const auto& row : t.rows) {
        if (!spec.filter_column.empty() && cell_text(row[filter]) != spec.filter_value) continue;
        const double x = cell_number(row[col]);
        if (!std::isnan(x)) xs.push_back(x);
    }
    Aggregate out = spec;
    out.count = xs.size();
    out.median = median_of(xs);
    double s = 0.0;
    for (double x : xs) s += x;
    out.mean = xs.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    return out;
}

const Aggregate& RunReport::add_aggregate(std::string name, std::string table, std::string column,
                                          std::string filter_column, std::string filter_value) {
    Aggregate spec;
    spec.name = std::move(name);
    spec.table = std::move(table);
    spec.column = std::move(column);
    spec.filter_column = std::move(filter_column);
    spec.filter_value = std::move(filter_value);
    aggregates_.push_back(compute(spec));
    return aggregates_.back();
}

const Aggregate& RunReport::aggregate(const std::string& name) const {
    for (const auto& a : aggregates_)
        if (a.name == name) return a;
    throw std::invalid_argument("no aggregate " + name);
}

Verdict& RunReport::push(Verdict v) {
    v.pass = v.evaluate();
    verdicts_.push_back(std::move(v));
    return verdicts_.back();
}

const Verdict& RunReport::check_le(std::string name, double value, double limit) {
    return push({std::move(name), value, Verdict::Op::LessEqual, -std::numeric_limits<double>::infinity(), limit});
}

const Verdict& RunReport::check_ge(std::string name, double value, double limit) {
    return push({std::move(name), value, Verdict::Op::GreaterEqual, limit, std::numeric_limits<double>::infinity()});
}

const Verdict& RunReport::check_within(std::string name, double value, double lo, double hi) {
    return push({std::move(name), value, Verdict::Op::Within, lo, hi});
}

bool RunReport::passed() const {
    return std::all_of(verdicts_.begin(), verdicts_.end(), [](const Verdict& v) { return v.pass; });
}

bool RunReport::self_consistent() const {
    auto same = [](double a, double b) {
        if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
        return std::abs(a - b) <= 1e-12 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
    };
    for (const auto& a : aggregates_) {
        const Aggregate r = compute(a);
        if (r.count != a.count || !same(r.median, a.median) || !same(r.mean, a.mean) || !same(r.std, a.std))
            return false;
    }
    for (const auto& v : verdicts_)
        if (v.evaluate() != v.pass) return false;
    return true;
}

nlohmann::ordered_json RunReport::to_json() const {
    using json = nlohmann::ordered_json;
    json j;
    j["experiment"] = experiment_;
    j["seed"] = seed_;
    j["passed"] = passed();
    json info = json::object();
    for (const auto& [k, v] : info_) info[k] = v;
    j["info"] = info;
    json bounds = json::object();
    for (const auto& [k, v] : bounds_) bounds[k] = real_json(v);
    j["bounds"] = bounds;
    json verdicts = json::array();
    for (const auto& v : verdicts_) {
        verdicts.push_back({{"name", v.name},
                            {"value", real_json(v.value)},
                            {"op", op_name(v.op)},
                            {"lo", real_json(v.lo)},
                            {"hi", real_json(v.hi)},
                            {"pass", v.pass}});
    }
    j["verdicts"] = verdicts;
    json aggs = json::array();
    for (const auto& a : aggregates_) {
        aggs.push_back({{"name", a.name},
                        {"table", a.table},
                        {"column", a.column},
                        {"filter_column", a.filter_column},
                        {"filter_value", a.filter_value},
                        {"count", a.count},
                        {"median", real_json(a.median)},
                        {"mean", real_json(a.mean)},
                        {"std", real_json(a.std)}});
    }
    j["aggregates"] = aggs;
    json tables = json::array();
    for (const auto& t : tables_) {
        json rows = json::array();
        for (const auto& row : t.rows) {
            json r = json::array();
            for (const auto& c : row) {
                if (const auto* i = std::get_if<std::int64_t>(&c))
                    r.push_back(*i);
                else if (const auto* d = std::get_if<double>(&c))
                    r.push_back(real_json(*d));
                else
                    r.push_back(std::get<std::string>(c));
            }
            rows.push_back(std::move(r));
        }
        tables.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", std::move(rows)}});
    }
    j["tables"] = tables;
    return j;
}

RunReport RunReport::from_json(const nlohmann::ordered_json& j) {
    RunReport rep(j.at("experiment").get<std::string>(), j.at("seed").get<std::uint64_t>());
    for (const auto& [k, v] : j.at("info").items()) rep.add_info(k, v.get<std::string>());
    for (const auto& [k, v] : j.at("bounds").items()) rep.add_bound(k, json_real(v));
    for (const auto& t : j.at("tables")) {
        Table& table = rep.add_table(t.at("name").get<std::string>(), t.at("columns").get<std::vector<std::string>>());
        for (const auto& r : t.at("rows")) {
            std::vector<Cell> row;
            for (const auto& c : r) {
                if (c.is_null())
                    row.emplace_back(std::numeric_limits<double>::quiet_NaN());
                else if (c.is_number_integer())
                    row.emplace_back(c.get<std::int64_t>());
                else if (c.is_number())
                    row.emplace_back(c.get<double>());
                else
                    row.emplace_back(c.get<std::string>());
            }
            table.add_row(std::move(row));
        }
    }
    for (const auto& a : j.at("aggregates")) {
        Aggregate agg;
        agg.name = a.at("name").get<std::string>();
        agg.table = a.at("table").get<std::string>();
        agg.column = a.at("column").get<std::string>();
        agg.filter_column = a.at("filter_column").get<std::string>();
        agg.filter_value = a.at("filter_value").get<std::string>();
        agg.count = a.at("count").get<std::size_t>();
        agg.median = json_real(a.at("median"));
        agg.mean = json_real(a.at("mean"));
        agg.std = json_real(a.at("std"));
        rep.aggregates_.push_back(std::move(agg));
    }
    for (const auto& v : j.at("verdicts")) {
        Verdict verdict;
        verdict.name = v.at("name").get<std::string>();
        verdict.value = json_real(v.at("value"));
        verdict.op = op_from(v.at("op").get<std::string>());
        verdict.lo = v.at("lo").is_null() ? -std::numeric_limits<double>::infinity() : v.at("lo").get<double>();
        verdict.hi = v.at("hi").is_null() ? std::numeric_limits<double>::infinity() : v.at("hi").get<double>();
        verdict.pass = v.at("pass").get<bool>();
        rep.verdicts_.push_back(std::move(verdict));
    }
    return rep;
}

void RunReport::write_csv(const std::filesystem::path& path) const {
    if (tables_.empty()) throw std::logic_error("report has no tables");
    for (std::size_t i = 0; i < tables_.size(); ++i) {
        std::filesystem::path target = path;
        if (i > 0) {
            target = path.parent_path() /
                     (path.stem().string() + "." + tables_[i].name + path.extension().string());
        }
        std::ofstream out(target);
        if (!out) throw std::runtime_error("cannot write " + target.string());
        tables_[i].write_csv(out);
    }
}

void RunReport::write_summary(std::ostream& out) const {
    out << experiment_ << " (seed " << seed_ << ")\n";
    for (const auto& [k, v] : info_) out << "  " << k << ": " << v << '\n';
    for (const auto& a : aggregates_) {
        out << "  " << a.name << ": median " << format_real(a.median) << ", mean " << format_real(a.mean) << ", std "
            << format_real(a.std) << " (n=" << a.count << ")\n";
    }
    for (const auto& [k, v] : bounds_) out << "  bound " << k << " = " << format_real(v) << '\n';
    for (const auto& v : verdicts_) {
        out << "  [" << (v.pass ? "PASS" : "FAIL") << "] " << v.name << ": " << format_real(v.value);
        switch (v.op) {
            case Verdict::Op::LessEqual: out << " <= " << format_real(v.hi); break;
            case Verdict::Op::GreaterEqual: out << " >= " << format_real(v.lo); break;
            case Verdict::Op::Within: out << " in [" << format_real(v.lo) << ", " << format_real(v.hi) << "]"; break;
        }
        out << '\n';
    }
}

}  // namespace nso
