#include "nso/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace nso {

ConfigError::ConfigError(std::string source, int line, const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + message),
      line_(line) {}

namespace {

class LineParser {
public:
    LineParser(std::string_view text, const std::string& source, int line)
        : text_(text), source_(source), line_(line) {}

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(source_, line_, msg); }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }
    bool at_end_or_comment() {
        skip_ws();
        return pos_ >= text_.size() || text_[pos_] == '#';
    }
    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::string bare_key() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')
                ++pos_;
            else
                break;
        }
        if (pos_ == start) fail("expected a key");
        std::string key(text_.substr(start, pos_ - start));
        if (key.front() == '.' || key.back() == '.' || key.find("..") != std::string::npos)
            fail("malformed dotted key '" + key + "'");
        return key;
    }

    ConfigValue value() {
        skip_ws();
        if (pos_ >= text_.size()) fail("missing value");
        const char c = text_[pos_];
        ConfigValue v;
        v.line = line_;
        if (c == '"') {
            v.data = string_value();
        } else if (c == '[') {
            ++pos_;
            ConfigValue::Array items;
            skip_ws();
            if (!consume(']')) {
                while (true) {
                    items.push_back(value());
                    if (consume(']')) break;
                    if (!consume(',')) fail("expected ',' or ']' in array");
                    if (consume(']')) break;  // trailing comma
                }
            }
            v.data = std::move(items);
        } else if (text_.substr(pos_, 4) == "true") {
            pos_ += 4;
            v.data = true;
        } else if (text_.substr(pos_, 5) == "false") {
            pos_ += 5;
            v.data = false;
        } else {
            v.data = number();
        }
        return v;
    }

private:
    std::string string_value() {
        ++pos_;
        std::string out;
        while (pos_ < text_.size() && text_[pos_] != '"') {
            char c = text_[pos_++];
            if (c == '\\') {
                if (pos_ >= text_.size()) fail("unterminated escape");
                const char e = text_[pos_++];
                switch (e) {
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    default: fail(std::string("unsupported escape '\\") + e + "'");
                }
            }
            out.push_back(c);
        }
        if (pos_ >= text_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    std::variant<bool, std::int64_t, double, std::string, ConfigValue::Array> number() {
        const std::size_t start = pos_;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.' || c == '_')
                ++pos_;
            else
                break;
        }
        std::string token(text_.substr(start, pos_ - start));
        if (token.empty()) fail("expected a value");
        std::string digits;
        for (char c : token)
            if (c != '_') digits.push_back(c);
        if (!digits.empty() && digits.front() == '+') digits.erase(0, 1);
        const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" ||
                              digits == "-inf" || digits == "nan";
        if (!is_float) {
            std::int64_t i = 0;
            const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), i);
            if (res.ec == std::errc() && res.ptr == digits.data() + digits.size()) return i;
            fail("invalid value '" + token + "'");
        }
        if (digits == "inf" || digits == "-inf" || digits == "nan") fail("non-finite value '" + token + "'");
        double d = 0.0;
        const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), d);
        if (res.ec != std::errc() || res.ptr != digits.data() + digits.size()) fail("invalid number '" + token + "'");
        return d;
    }

    std::string_view text_;
    const std::string& source_;
    int line_;
    std::size_t pos_ = 0;
};

const char* type_name(const ConfigValue& v) {
    switch (v.data.index()) {
        case 0: return "boolean";
        case 1: return "integer";
        case 2: return "float";
        case 3: return "string";
        default: return "array";
    }
}

}  // namespace

Config Config::parse(std::string_view text, std::string source) {
    Config cfg;
    cfg.source_ = std::move(source);
    std::string prefix;
    std::set<std::string> tables;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        LineParser p(line, cfg.source_, line_no);
        if (!p.at_end_or_comment()) {
            if (p.consume('[')) {
                const std::string name = p.bare_key();
                if (!p.consume(']')) p.fail("expected ']' after table name");
                if (!p.at_end_or_comment()) p.fail("unexpected text after table header");
                if (!tables.insert(name).second) p.fail("table [" + name + "] defined twice");
                prefix = name + ".";
            } else {
                const std::string key = prefix + p.bare_key();
                if (!p.consume('=')) p.fail("expected '=' after key");
                ConfigValue v = p.value();
                if (!p.at_end_or_comment()) p.fail("unexpected text after value");
                if (cfg.values_.count(key)) p.fail("duplicate key '" + key + "'");
                cfg.values_.emplace(key, std::move(v));
            }
        }
        if (end == text.size()) break;
        start = end + 1;
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), 0, "cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

std::vector<std::string> Config::keys() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : values_) out.push_back(k);
    return out;
}

const ConfigValue* Config::find(const std::string& key) const {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
}

void Config::fail(const std::string& key, const std::string& message) const {
    throw ConfigError(source_, line_of(key), key + ": " + message);
}

int Config::line_of(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? 0 : it->second.line;
}

namespace {

double as_real(const Config& cfg, const std::string& key, const ConfigValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v.data)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v.data)) return *d;
    cfg.fail(key, std::string("expected a number, got ") + type_name(v));
}

std::int64_t as_int(const Config& cfg, const std::string& key, const ConfigValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v.data)) return *i;
    cfg.fail(key, std::string("expected an integer, got ") + type_name(v));
}

}  // namespace

double Config::get_real(const std::string& key, double fallback) const {
    const auto* v = find(key);
    return v ? as_real(*this, key, *v) : fallback;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
    const auto* v = find(key);
    return v ? as_int(*this, key, *v) : fallback;
}

std::uint64_t Config::get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    const std::int64_t i = as_int(*this, key, *v);
    if (i < 0) fail(key, "must be non-negative");
    return static_cast<std::uint64_t>(i);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* b = std::get_if<bool>(&v->data)) return *b;
    fail(key, std::string("expected a boolean, got ") + type_name(*v));
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (const auto* s = std::get_if<std::string>(&v->data)) return *s;
    fail(key, std::string("expected a string, got ") + type_name(*v));
}

std::vector<double> Config::get_reals(const std::string& key, const std::vector<double>& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    const auto* arr = std::get_if<ConfigValue::Array>(&v->data);
    if (!arr) fail(key, std::string("expected an array, got ") + type_name(*v));
    std::vector<double> out;
    for (const auto& item : *arr) out.push_back(as_real(*this, key, item));
    return out;
}

std::vector<std::int64_t> Config::get_ints(const std::string& key, const std::vector<std::int64_t>& fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    const auto* arr = std::get_if<ConfigValue::Array>(&v->data);
    if (!arr) fail(key, std::string("expected an array, got ") + type_name(*v));
    std::vector<std::int64_t> out;
    for (const auto& item : *arr) out.push_back(as_int(*this, key, item));
    return out;
}

void Config::reject_unknown() const {
    for (const auto& [key, v] : values_)
        if (!used_.count(key)) throw ConfigError(source_, v.line, "unknown key '" + key + "'");
}

void Config::set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }

}  // namespace nso
