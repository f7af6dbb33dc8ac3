#ifndef OSHEDA_RUN_CONFIG_HPP
#define OSHEDA_RUN_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace osheda {

/// Flat `key = value` run configuration ('#' comments, blank lines
/// ignored). Every file must declare `schema_version = 1`. Values are
/// typed on access; lists are comma-separated.
class RunConfig {
public:
    static RunConfig from_file(const std::string& path);
    static RunConfig from_string(const std::string& text);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key) const;

    /// Raw file bytes as read (feeds the manifest hash).
    const std::string& raw_text() const { return raw_; }

private:
    std::map<std::string, std::string> values_;
    std::string raw_;
};

} // namespace osheda

#endif
