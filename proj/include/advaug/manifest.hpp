#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace advaug {

std::string file_fingerprint(const std::string& path);

// Record of one CLI run: the exact argv, the config echo, and fingerprints
// of everything read and written. Replaying the argv must reproduce the
// outputs bitwise.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json config;
    std::uint64_t master_seed = 0;
    std::map<std::string, std::string> inputs;  // path -> fingerprint
    std::map<std::string, std::string> outputs; // path -> fingerprint
    double wall_clock_ms = 0.0;
};

void save_manifest(const std::string& path, const RunManifest& manifest);
RunManifest load_manifest(const std::string& path);

} // namespace advaug
