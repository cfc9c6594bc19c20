#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace confound {

// Line-oriented "key = value" configuration. '#' starts a comment; blank
// lines are ignored; keys are unique (later assignments win).
struct ConfigFile {
    std::map<std::string, std::string> values;

    static ConfigFile load(const std::string& path);
    static ConfigFile parse(const std::string& text);

    bool has(const std::string& key) const { return values.count(key) > 0; }
    std::optional<std::string> find(const std::string& key) const;
    std::string get(const std::string& key) const;  // throws SchemaError when absent
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;

    // keys that start with `prefix.`, with the prefix stripped
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;
};

std::vector<std::string> split_list(const std::string& text);  // comma-separated

}  // namespace confound
