#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "advnoise/linalg.hpp"

namespace advnoise {

/// Bad configuration text or value; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat "section.key" -> value store read from INI-style text:
///
///     # comment
///     [train]
///     epochs = 100
///
/// Keys outside any section are stored under their bare name. Later sets
/// overwrite earlier ones, which is how flags override a file.
class Config {
  public:
    static Config parse(std::istream& is, const std::string& origin = "<config>") {
        Config c;
        std::string line, section;
        std::size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto text = trim(strip_comment(line));
            if (text.empty()) continue;
            if (text.front() == '[') {
                if (text.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": unclosed section");
                section = trim(text.substr(1, text.size() - 2));
                continue;
            }
            const auto eq = text.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
            const auto key = trim(text.substr(0, eq));
            if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            c.set(section.empty() ? key : section + "." + key, trim(text.substr(eq + 1)));
        }
        return c;
    }

    static Config load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot read config file " + path);
        return parse(is, path);
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    /// Applies "section.key=value".
    void set_assignment(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("expected section.key=value, got '" + assignment + "'");
        set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
    }

    void merge(const Config& other) {
        for (const auto& [k, v] : other.values_) values_[k] = v;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    const std::string& str(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
        return it->second;
    }

    double real(const std::string& key) const { return to_real(key, str(key)); }

    std::uint64_t count(const std::string& key) const { return to_count(key, str(key)); }

    bool flag(const std::string& key) const {
        const auto& v = str(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("config key '" + key + "' expects a boolean, got '" + v + "'");
    }

    /// Comma-separated reals; an empty value is an empty list.
    Vector reals(const std::string& key) const {
        Vector out;
        for (const auto& item : split(str(key))) out.push_back(to_real(key, item));
        return out;
    }

    std::vector<std::size_t> counts(const std::string& key) const {
        std::vector<std::size_t> out;
        for (const auto& item : split(str(key))) out.push_back(static_cast<std::size_t>(to_count(key, item)));
        return out;
    }

    /// Rejects keys this command does not know, so typos fail loudly.
    void require_known(const std::set<std::string>& known) const {
        for (const auto& [k, v] : values_)
            if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }

    std::set<std::string> keys() const {
        std::set<std::string> out;
        for (const auto& [k, v] : values_) out.insert(k);
        return out;
    }

    /// Writes the store back as sectioned text that parse() reads unchanged.
    void write(std::ostream& os) const {
        std::map<std::string, std::vector<std::pair<std::string, std::string>>> by_section;
        for (const auto& [k, v] : values_) {
            const auto dot = k.find('.');
            if (dot == std::string::npos)
                by_section[""].emplace_back(k, v);
            else
                by_section[k.substr(0, dot)].emplace_back(k.substr(dot + 1), v);
        }
        bool first = true;
        for (const auto& [section, entries] : by_section) {
            if (!section.empty()) os << (first ? "" : "\n") << '[' << section << "]\n";
            for (const auto& [k, v] : entries) os << k << " = " << v << '\n';
            first = false;
        }
    }

    std::string to_string() const {
        std::ostringstream os;
        write(os);
        return os.str();
    }

    bool operator==(const Config&) const = default;

  private:
    std::map<std::string, std::string> values_;

    static std::string strip_comment(const std::string& s) {
        const auto p = s.find('#');
        return p == std::string::npos ? s : s.substr(0, p);
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static std::vector<std::string> split(const std::string& s) {
        std::vector<std::string> out;
        std::string item;
        std::istringstream ss(s);
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    static double to_real(const std::string& key, const std::string& v) {
        // "a/b" is accepted so radii can be written as 8/255.
        const auto slash = v.find('/');
        if (slash != std::string::npos) {
            const double q = to_real(key, v.substr(0, slash)) / to_real(key, v.substr(slash + 1));
            if (!std::isfinite(q)) throw ConfigError("config key '" + key + "' is not finite: '" + v + "'");
            return q;
        }
        double out = 0.0;
        const auto* end = v.data() + v.size();
        const auto [p, ec] = std::from_chars(v.data(), end, out);
        if (ec != std::errc() || p != end || !std::isfinite(out))
            throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
        return out;
    }

    static std::uint64_t to_count(const std::string& key, const std::string& v) {
        std::uint64_t out = 0;
        const auto* end = v.data() + v.size();
        const auto [p, ec] = std::from_chars(v.data(), end, out);
        if (ec != std::errc() || p != end || v.empty())
            throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
        return out;
    }
};

}  // namespace advnoise
