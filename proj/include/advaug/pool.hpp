#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "advaug/datagen.hpp"
#include "advaug/tensor.hpp"

namespace advaug {

// One precomputed augmentation patch (or a plain dataset example when kind
// is "real"; dataset files reuse this container).
struct PoolRecord {
    Source kind = Source::real;
    int label = 0;
    Tensor payload;
    std::uint64_t seed = 0;          // per-record provenance stream
    std::string source_model;        // fingerprint of the attacked model, empty for data
};

struct Pool {
    std::string source_model;        // fingerprint of the attacked model
    std::uint64_t seed = 0;          // master seed of the generating run
    nlohmann::json config;           // echo of the generating configuration
    std::vector<PoolRecord> records;
};

void save_pool(const std::string& path, const Pool& pool);
Pool load_pool(const std::string& path);

std::vector<LabeledExample> pool_examples(const Pool& pool);
Pool pool_from_examples(const std::vector<LabeledExample>& examples, std::uint64_t seed);

} // namespace advaug
