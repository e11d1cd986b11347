#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cdal/core/errors.hpp"

namespace cdal::config {

// Flat dotted-key configuration. Files use INI-style sections:
//   [train]
//   T = 4
// which reads as the key "train.T". Dotted keys also work directly, and
// command-line overrides arrive as "key=value" strings. Every key that is
// never consumed by a typed getter is reported as unknown, so typos fail
// loudly instead of silently using defaults.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot open " + path);
        KeyValueConfig cfg;
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = strip_comment(line);
            trim(s);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw ConfigError("config: malformed section at " + path + ":" + std::to_string(lineno));
                section = s.substr(1, s.size() - 2);
                trim(section);
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config: expected key=value at " + path + ":" + std::to_string(lineno));
            std::string key = s.substr(0, eq), value = s.substr(eq + 1);
            trim(key);
            trim(value);
            unquote(value);
            if (key.empty())
                throw ConfigError("config: empty key at " + path + ":" + std::to_string(lineno));
            if (!section.empty()) key = section + "." + key;
            cfg.values_[key] = value;
        }
        return cfg;
    }

    void apply_override(const std::string& kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: override must be key=value, got '" + kv + "'");
        std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
        trim(key);
        trim(value);
        unquote(value);
        if (key.empty()) throw ConfigError("config: override has empty key");
        values_[key] = value;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& def = "") {
        consumed_.insert(key);
        auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }

    std::string require_string(const std::string& key) {
        consumed_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end() || it->second.empty())
            throw ConfigError("config: missing required key '" + key + "'");
        return it->second;
    }

    int get_int(const std::string& key, int def) { return parse_as<int>(key, def); }
    int64_t get_i64(const std::string& key, int64_t def) { return parse_as<int64_t>(key, def); }
    uint64_t get_u64(const std::string& key, uint64_t def) { return parse_as<uint64_t>(key, def); }
    double get_double(const std::string& key, double def) { return parse_as<double>(key, def); }

    bool get_bool(const std::string& key, bool def) {
        consumed_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        std::string v = it->second;
        std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
        if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
        if (v == "0" || v == "false" || v == "no" || v == "off") return false;
        throw ConfigError("config: key '" + key + "' is not a boolean: " + it->second);
    }

    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& def) {
        consumed_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        std::vector<int> out;
        std::stringstream ss(it->second);
        std::string part;
        while (std::getline(ss, part, ',')) {
            trim(part);
            if (part.empty()) continue;
            out.push_back(parse_scalar<int>(key, part));
        }
        if (out.empty()) throw ConfigError("config: key '" + key + "' is an empty list");
        return out;
    }

    // Fails if the file or an override mentioned a key no getter asked for.
    void check_all_consumed() const {
        std::vector<std::string> unknown;
        for (const auto& [k, v] : values_)
            if (!consumed_.count(k)) unknown.push_back(k);
        if (!unknown.empty()) {
            std::string msg = "config: unknown key(s):";
            for (const auto& k : unknown) msg += " '" + k + "'";
            throw ConfigError(msg);
        }
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    template <typename T>
    T parse_as(const std::string& key, T def) {
        consumed_.insert(key);
        auto it = values_.find(key);
        if (it == values_.end()) return def;
        return parse_scalar<T>(key, it->second);
    }

    template <typename T>
    static T parse_scalar(const std::string& key, const std::string& text) {
        std::stringstream ss(text);
        T v{};
        ss >> v;
        if (ss.fail() || !ss.eof())
            throw ConfigError("config: key '" + key + "' has malformed value '" + text + "'");
        return v;
    }

    static std::string strip_comment(const std::string& line) {
        bool quoted = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (!quoted && (line[i] == '#' || line[i] == ';')) return line.substr(0, i);
        }
        return line;
    }

    static void trim(std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        const auto e = s.find_last_not_of(" \t\r\n");
        s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    }

    static void unquote(std::string& s) {
        if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    }

    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

}  // namespace cdal::config
