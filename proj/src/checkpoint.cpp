#include "advaug/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "advaug/errors.hpp"
#include "advaug/rng.hpp"

namespace advaug {

using nlohmann::json;

namespace {

json tensor_to_json(const Tensor& t) {
    return json(std::vector<double>(t.data().begin(), t.data().end()));
}

Tensor tensor_from_json(const json& j, Shape shape) {
    return Tensor::from(std::move(shape), j.get<std::vector<double>>());
}

json net_to_json(const DenseNet& net) {
    json layers = json::array();
    for (const auto& layer : net.layers()) {
        json l;
        l["in"] = layer.w.rows();
        l["out"] = layer.w.cols();
        l["act"] = activation_name(layer.act);
        l["spectral"] = layer.spectral;
        l["w"] = tensor_to_json(layer.w);
        l["b"] = tensor_to_json(layer.b);
        if (layer.spectral) {
            l["sn_u"] = tensor_to_json(layer.sn_u);
            l["sn_v"] = tensor_to_json(layer.sn_v);
        }
        layers.push_back(std::move(l));
    }
    return json{{"layers", std::move(layers)}};
}

DenseNet net_from_json(const json& j) {
    DenseNet net;
    for (const auto& l : j.at("layers")) {
        DenseLayer layer;
        std::size_t in = l.at("in").get<std::size_t>();
        std::size_t out = l.at("out").get<std::size_t>();
        layer.w = tensor_from_json(l.at("w"), {in, out});
        layer.b = tensor_from_json(l.at("b"), {out});
        layer.act = activation_from_name(l.at("act").get<std::string>());
        layer.spectral = l.at("spectral").get<bool>();
        if (layer.spectral) {
            layer.sn_u = tensor_from_json(l.at("sn_u"), {in});
            layer.sn_v = tensor_from_json(l.at("sn_v"), {out});
        }
        net.layers().push_back(std::move(layer));
    }
    if (net.layers().empty()) throw ConfigError("checkpoint: network has no layers");
    for (std::size_t i = 0; i + 1 < net.layers().size(); ++i) {
        if (net.layers()[i].w.cols() != net.layers()[i + 1].w.rows()) {
            throw ConfigError("checkpoint: layer extents do not chain at layer " + std::to_string(i));
        }
    }
    return net;
}

json meta_to_json(const CheckpointMeta& meta) {
    json m;
    m["seed_lineage"] = meta.seed_lineage;
    if (!meta.baseline_path.empty()) m["baseline_path"] = meta.baseline_path;
    if (!meta.baseline_fingerprint.empty()) m["baseline_fingerprint"] = meta.baseline_fingerprint;
    return m;
}

CheckpointMeta meta_from_json(const json& j) {
    CheckpointMeta meta;
    if (j.contains("seed_lineage")) meta.seed_lineage = j.at("seed_lineage").get<std::vector<std::uint64_t>>();
    if (j.contains("baseline_path")) meta.baseline_path = j.at("baseline_path").get<std::string>();
    if (j.contains("baseline_fingerprint")) {
        meta.baseline_fingerprint = j.at("baseline_fingerprint").get<std::string>();
    }
    return meta;
}

json classifier_content(const Classifier& model) {
    json j;
    j["format"] = "advaug-checkpoint";
    j["version"] = 1;
    j["kind"] = "classifier";
    j["head"] = head_name(model.head);
    j["net"] = net_to_json(model.net);
    return j;
}

json synthesizer_content(const SynthesizerBundle& bundle) {
    json j;
    j["format"] = "advaug-checkpoint";
    j["version"] = 1;
    j["kind"] = "synthesizer";
    j["latent_dim"] = bundle.latent_dim;
    j["lambda1"] = bundle.lambda1;
    j["lambda2"] = bundle.lambda2;
    j["lambda_gp"] = bundle.lambda_gp;
    j["encoder"] = net_to_json(bundle.encoder);
    j["generator"] = net_to_json(bundle.generator);
    j["critic"] = net_to_json(bundle.critic);
    return j;
}

std::string fingerprint_of(const json& content) { return hex64(fnv1a64(content.dump())); }

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out.good()) throw IoError("write failed: " + path);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
    return j;
}

json read_checkpoint(const std::string& path, const char* expected_kind) {
    json j = read_json_file(path);
    try {
        if (j.at("format").get<std::string>() != "advaug-checkpoint") {
            throw ConfigError(path + ": not an advaug checkpoint");
        }
        if (j.at("kind").get<std::string>() != expected_kind) {
            throw ConfigError(path + ": checkpoint kind '" + j.at("kind").get<std::string>() +
                              "', expected '" + expected_kind + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(path + ": bad checkpoint structure: " + e.what());
    }
    return j;
}

} // namespace

std::string model_fingerprint(const Classifier& model) {
    return fingerprint_of(classifier_content(model));
}

std::string model_fingerprint(const SynthesizerBundle& bundle) {
    return fingerprint_of(synthesizer_content(bundle));
}

void save_classifier(const std::string& path, const Classifier& model, const CheckpointMeta& meta) {
    json j = classifier_content(model);
    j["fingerprint"] = fingerprint_of(j);
    j["meta"] = meta_to_json(meta);
    write_json_file(path, j);
}

Classifier load_classifier(const std::string& path, CheckpointMeta* meta) {
    json j = read_checkpoint(path, "classifier");
    Classifier model;
    try {
        model.head = head_from_name(j.at("head").get<std::string>());
        model.net = net_from_json(j.at("net"));
        if (meta && j.contains("meta")) *meta = meta_from_json(j.at("meta"));
    } catch (const json::exception& e) {
        throw ConfigError(path + ": bad checkpoint structure: " + e.what());
    }
    std::size_t logits = model.head == HeadKind::cross_entropy ? 1 : 2;
    if (model.net.output_dim() != logits) {
        throw ConfigError(path + ": head '" + head_name(model.head) + "' expects " +
                          std::to_string(logits) + " logits, net emits " +
                          std::to_string(model.net.output_dim()));
    }
    return model;
}

void save_synthesizer(const std::string& path, const SynthesizerBundle& bundle,
                      const CheckpointMeta& meta) {
    json j = synthesizer_content(bundle);
    j["fingerprint"] = fingerprint_of(j);
    j["meta"] = meta_to_json(meta);
    write_json_file(path, j);
}

SynthesizerBundle load_synthesizer(const std::string& path, CheckpointMeta* meta) {
    json j = read_checkpoint(path, "synthesizer");
    SynthesizerBundle bundle;
    try {
        bundle.latent_dim = j.at("latent_dim").get<std::size_t>();
        bundle.lambda1 = j.at("lambda1").get<double>();
        bundle.lambda2 = j.at("lambda2").get<double>();
        bundle.lambda_gp = j.at("lambda_gp").get<double>();
        bundle.encoder = net_from_json(j.at("encoder"));
        bundle.generator = net_from_json(j.at("generator"));
        bundle.critic = net_from_json(j.at("critic"));
        if (meta && j.contains("meta")) *meta = meta_from_json(j.at("meta"));
    } catch (const json::exception& e) {
        throw ConfigError(path + ": bad checkpoint structure: " + e.what());
    }
    bundle.validate();
    return bundle;
}

} // namespace advaug
