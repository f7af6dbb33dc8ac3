#ifndef OSHEDA_MANIFEST_HPP
#define OSHEDA_MANIFEST_HPP

#include <string>
#include <vector>

namespace osheda {

/// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(const std::string& bytes);

/// Content-addressed run record. The hash covers the config bytes and
/// every referenced input file, never the timestamp, so reruns of the same
/// inputs reproduce the same hash (and output files that embed it).
struct RunManifest {
    std::string command;
    std::string config_text;
    std::vector<std::pair<std::string, std::string>> input_hashes; // path, sha256
    std::vector<std::string> outputs;
    std::string timestamp; // informational only, outside the hash

    std::string content_hash() const;
    std::string to_json() const;
};

RunManifest make_manifest(const std::string& command, const std::string& config_text,
                          const std::vector<std::string>& input_paths);

void write_manifest(const RunManifest& manifest, const std::string& path);

} // namespace osheda

#endif
