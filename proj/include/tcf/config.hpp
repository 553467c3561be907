#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace tcf {

// Hierarchical key-value configuration: INI-style sections whose keys are
// addressed as "section.key". '#' starts a comment. Command-line overrides
// use the same dotted form.
class Config {
  public:
    Config() = default;

    static Config parse_string(const std::string& text);
    static Config parse_file(const std::string& path);

    void set(const std::string& dotted_key, const std::string& value);
    // Applies "section.key=value" override strings.
    void apply_overrides(const std::vector<std::string>& overrides);

    bool has(const std::string& dotted_key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    long get_long(const std::string& key, long fallback) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    // Throws ConfigError naming every key not in `known`.
    void require_known_keys(const std::set<std::string>& known) const;

    // Canonical text form (sorted sections/keys); stable input for hashing.
    std::string dump() const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

  private:
    std::map<std::string, std::string> entries_;  // "section.key" -> raw value
};

}  // namespace tcf
