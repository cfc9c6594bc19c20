#include "confound/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "confound/errors.hpp"

namespace confound {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open config '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

ConfigFile ConfigFile::parse(const std::string& text) {
    ConfigFile cfg;
    std::stringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw SchemaError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw SchemaError("config line " + std::to_string(line_no) + ": empty key");
        }
        cfg.values[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

std::optional<std::string> ConfigFile::find(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    return it->second;
}

std::string ConfigFile::get(const std::string& key) const {
    auto v = find(key);
    if (!v) throw SchemaError("config key '" + key + "' is required");
    return *v;
}

std::string ConfigFile::get_or(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    char* end = nullptr;
    const double out = std::strtod(v->c_str(), &end);
    if (end != v->c_str() + v->size()) {
        throw SchemaError("config key '" + key + "': '" + *v + "' is not a number");
    }
    return out;
}

long long ConfigFile::get_int(const std::string& key, long long fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    char* end = nullptr;
    const long long out = std::strtoll(v->c_str(), &end, 10);
    if (end != v->c_str() + v->size()) {
        throw SchemaError("config key '" + key + "': '" + *v + "' is not an integer");
    }
    return out;
}

std::vector<std::string> ConfigFile::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    const std::string full = prefix + ".";
    for (const auto& [key, _] : values) {
        if (key.rfind(full, 0) == 0) out.push_back(key.substr(full.size()));
    }
    return out;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (ch == ',') {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

}  // namespace confound
