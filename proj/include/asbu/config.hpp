#pragma once

#include <map>
#include <string>
#include <vector>

#include "asbu/errors.hpp"

namespace asbu {

/// Flat `key = value` text with `#` comments and blank lines.
class KVConfig {
public:
    static KVConfig parse(const std::string& text);
    static KVConfig parse_file(const std::string& path);

    bool has(const std::string& key) const { return map_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    /// Throws ConfigError naming the first key not in `known`.
    void require_known(const std::vector<std::string>& known) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
    std::map<std::string, std::string> map_;
};

}  // namespace asbu
