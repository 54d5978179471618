#include "asbu/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace asbu {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KVConfig KVConfig::parse(const std::string& text) {
    KVConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        }
        if (cfg.map_.count(key)) {
            throw ConfigError("config: duplicate key '" + key + "'");
        }
        cfg.entries_.emplace_back(key, value);
        cfg.map_[key] = value;
    }
    return cfg;
}

KVConfig KVConfig::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

const std::string& KVConfig::get(const std::string& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) {
        throw ConfigError("config: missing key '" + key + "'");
    }
    return it->second;
}

std::string KVConfig::get_or(const std::string& key, const std::string& fallback) const {
    auto it = map_.find(key);
    return it == map_.end() ? fallback : it->second;
}

int KVConfig::get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t pos = 0;
        int out = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not an integer: " + v);
    }
}

double KVConfig::get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not a number: " + v);
    }
}

bool KVConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean: " + v);
}

void KVConfig::require_known(const std::vector<std::string>& known) const {
    for (const auto& [key, value] : entries_) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    }
}

}  // namespace asbu
