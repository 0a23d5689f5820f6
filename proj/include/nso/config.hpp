#pragma once

// Strict reader for the subset of TOML used by experiment configs:
// [table] headers, key = value pairs, '#' comments, and values that are
// booleans, integers, floats, basic strings or single-line arrays of those.
// Every key must be consumed by the experiment; leftovers are errors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nso {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string source, int line, const std::string& message);
    int line() const noexcept { return line_; }

private:
    int line_;
};

struct ConfigValue {
    using Array = std::vector<ConfigValue>;
    std::variant<bool, std::int64_t, double, std::string, Array> data;
    int line = 0;
};

class Config {
public:
    static Config parse(std::string_view text, std::string source = "<config>");
    static Config load(const std::filesystem::path& path);

    const std::string& source() const noexcept { return source_; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::vector<std::string> keys() const;

    /// Typed accessors; keys use dotted names for tables ("sensing.d").
    double get_real(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::vector<double> get_reals(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::int64_t> get_ints(const std::string& key, const std::vector<std::int64_t>& fallback) const;

    /// Line number of a key (0 when absent).
    int line_of(const std::string& key) const;
    /// Throws ConfigError naming the first key no accessor asked for.
    void reject_unknown() const;
    /// Raises a ConfigError at the key's line.
    [[noreturn]] void fail(const std::string& key, const std::string& message) const;

    /// Inserts or overrides a value (used for command-line overrides).
    void set(const std::string& key, ConfigValue value);

private:
    const ConfigValue* find(const std::string& key) const;

    std::string source_;
    std::map<std::string, ConfigValue> values_;
    mutable std::set<std::string> used_;
};

}  // namespace nso
