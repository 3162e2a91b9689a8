#include "advaug/pool.hpp"

#include <fstream>

#include "advaug/errors.hpp"

namespace advaug {

using nlohmann::json;

void save_pool(const std::string& path, const Pool& pool) {
    json j;
    j["format"] = "advaug-pool";
    j["version"] = 1;
    j["source_model"] = pool.source_model;
    j["seed"] = pool.seed;
    j["config"] = pool.config;
    json records = json::array();
    for (const auto& r : pool.records) {
        json rec;
        rec["kind"] = source_name(r.kind);
        rec["label"] = r.label;
        rec["shape"] = r.payload.shape();
        rec["data"] = std::vector<double>(r.payload.data().begin(), r.payload.data().end());
        rec["seed"] = r.seed;
        if (!r.source_model.empty()) rec["source_model"] = r.source_model;
        records.push_back(std::move(rec));
    }
    j["records"] = std::move(records);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump() << "\n";
    if (!out.good()) throw IoError("write failed: " + path);
}

Pool load_pool(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
    Pool pool;
    try {
        if (j.at("format").get<std::string>() != "advaug-pool") {
            throw ConfigError(path + ": not an advaug pool file");
        }
        pool.source_model = j.at("source_model").get<std::string>();
        pool.seed = j.at("seed").get<std::uint64_t>();
        pool.config = j.value("config", json::object());
        for (const auto& rec : j.at("records")) {
            PoolRecord r;
            r.kind = source_from_name(rec.at("kind").get<std::string>());
            r.label = rec.at("label").get<int>();
            r.payload = Tensor::from(rec.at("shape").get<Shape>(),
                                     rec.at("data").get<std::vector<double>>());
            r.seed = rec.value("seed", std::uint64_t{0});
            r.source_model = rec.value("source_model", std::string{});
            pool.records.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw ConfigError(path + ": bad pool structure: " + e.what());
    }
    return pool;
}

std::vector<LabeledExample> pool_examples(const Pool& pool) {
    std::vector<LabeledExample> out;
    out.reserve(pool.records.size());
    for (const auto& r : pool.records) {
        LabeledExample e{r.payload, r.label, r.kind};
        validate_example(e);
        out.push_back(std::move(e));
    }
    return out;
}

Pool pool_from_examples(const std::vector<LabeledExample>& examples, std::uint64_t seed) {
    Pool pool;
    pool.seed = seed;
    for (const auto& e : examples) {
        validate_example(e);
        pool.records.push_back({e.source, e.label, e.x, 0, {}});
    }
    return pool;
}

} // namespace advaug
