#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advaug/heads.hpp"
#include "advaug/synthesizer.hpp"

namespace advaug {

struct CheckpointMeta {
    std::vector<std::uint64_t> seed_lineage; // master seeds that shaped these weights, oldest first
    std::string baseline_path;               // set on finetuned models
    std::string baseline_fingerprint;
};

// Stable content hash of the weights + architecture (meta excluded).
std::string model_fingerprint(const Classifier& model);
std::string model_fingerprint(const SynthesizerBundle& bundle);

void save_classifier(const std::string& path, const Classifier& model, const CheckpointMeta& meta);
Classifier load_classifier(const std::string& path, CheckpointMeta* meta = nullptr);

void save_synthesizer(const std::string& path, const SynthesizerBundle& bundle, const CheckpointMeta& meta);
SynthesizerBundle load_synthesizer(const std::string& path, CheckpointMeta* meta = nullptr);

} // namespace advaug
