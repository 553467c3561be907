#include "tcf/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tcf/error.hpp"

namespace tcf {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ParseError("empty section name", line_no);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", line_no);
        cfg.entries_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream oss;
    oss << in.rdbuf();
    return parse_string(oss.str());
}

void Config::set(const std::string& dotted_key, const std::string& value) { entries_[dotted_key] = value; }

void Config::apply_overrides(const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + ov + "' is not key=value");
        set(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
    }
}

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

long Config::get_long(const std::string& key, long fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const long v = std::stol(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument(it->second);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' = '" + it->second + "' is not an integer");
    }
}

int Config::get_int(const std::string& key, int fallback) const { return static_cast<int>(get_long(key, fallback)); }

double Config::get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument(it->second);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' = '" + it->second + "' is not a number");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "' = '" + it->second + "' is not a boolean");
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument(it->second);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' = '" + it->second + "' is not an unsigned integer");
    }
}

void Config::require_known_keys(const std::set<std::string>& known) const {
    std::string bad;
    for (const auto& [key, value] : entries_) {
        (void)value;
        if (!known.count(key)) bad += (bad.empty() ? "" : ", ") + key;
    }
    if (!bad.empty()) throw ConfigError("unknown config keys: " + bad);
}

std::string Config::dump() const {
    std::ostringstream oss;
    std::string section;
    for (const auto& [key, value] : entries_) {
        const auto dot = key.rfind('.');
        const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
        const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
        if (sec != section) {
            oss << '[' << sec << "]\n";
            section = sec;
        }
        oss << name << " = " << value << '\n';
    }
    return oss.str();
}

}  // namespace tcf
