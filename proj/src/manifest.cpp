#include "advaug/manifest.hpp"

#include <fstream>
#include <sstream>

#include "advaug/errors.hpp"
#include "advaug/rng.hpp"

namespace advaug {

using nlohmann::json;

std::string file_fingerprint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for fingerprinting: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string bytes = ss.str();
    return hex64(fnv1a64(bytes.data(), bytes.size()));
}

void save_manifest(const std::string& path, const RunManifest& manifest) {
    json j;
    j["format"] = "advaug-manifest";
    j["version"] = 1;
    j["command"] = manifest.command;
    j["argv"] = manifest.argv;
    j["config"] = manifest.config;
    j["master_seed"] = manifest.master_seed;
    j["inputs"] = manifest.inputs;
    j["outputs"] = manifest.outputs;
    j["wall_clock_ms"] = manifest.wall_clock_ms;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out.good()) throw IoError("write failed: " + path);
}

RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
    RunManifest m;
    try {
        if (j.at("format").get<std::string>() != "advaug-manifest") {
            throw ConfigError(path + ": not an advaug manifest");
        }
        m.command = j.at("command").get<std::string>();
        m.argv = j.at("argv").get<std::vector<std::string>>();
        m.config = j.value("config", json::object());
        m.master_seed = j.value("master_seed", std::uint64_t{0});
        m.inputs = j.value("inputs", std::map<std::string, std::string>{});
        m.outputs = j.value("outputs", std::map<std::string, std::string>{});
        m.wall_clock_ms = j.value("wall_clock_ms", 0.0);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": bad manifest structure: " + e.what());
    }
    return m;
}

} // namespace advaug
