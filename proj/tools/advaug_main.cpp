// advaug: adversarial-augmentation laboratory CLI.
// Subcommands cover the full chain: data generation, baseline training,
// synthesizer training, attack-pool generation, fine-tuning, detection,
// FROC evaluation, stress tests, and boundary figures. Every command echoes
// its configuration into a manifest whose argv replays bitwise.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "advaug/attack.hpp"
#include "advaug/checkpoint.hpp"
#include "advaug/datagen.hpp"
#include "advaug/errors.hpp"
#include "advaug/figures.hpp"
#include "advaug/froc.hpp"
#include "advaug/manifest.hpp"
#include "advaug/pool.hpp"
#include "advaug/svg.hpp"
#include "advaug/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace advaug;

namespace {

int run_cli(const std::vector<std::string>& args, int depth);

void require_input_file(const std::string& path, const std::string& flag) {
    if (!fs::exists(path)) {
        throw ConfigError(flag + ": file not found: " + path);
    }
}

class ManifestWriter {
public:
    ManifestWriter(std::string command, const std::vector<std::string>& argv)
        : start_(std::chrono::steady_clock::now()) {
        manifest_.command = std::move(command);
        manifest_.argv = argv;
    }

    void config(json j) { manifest_.config = std::move(j); }
    void seed(std::uint64_t s) { manifest_.master_seed = s; }
    void input(const std::string& path) { manifest_.inputs[path] = file_fingerprint(path); }
    void output(const std::string& path) { manifest_.outputs[path] = ""; }

    void finish(const std::string& manifest_path) {
        for (auto& [path, fp] : manifest_.outputs) fp = file_fingerprint(path);
        manifest_.wall_clock_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
                .count();
        save_manifest(manifest_path, manifest_);
    }

private:
    RunManifest manifest_;
    std::chrono::steady_clock::time_point start_;
};

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

std::vector<std::size_t> parse_hidden(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& item : split_csv_list(s)) {
        try {
            out.push_back(static_cast<std::size_t>(std::stoul(item)));
        } catch (const std::exception&) {
            throw ConfigError("--hidden: not a layer width: " + item);
        }
    }
    if (out.empty()) throw ConfigError("--hidden: need at least one layer width");
    return out;
}

// Dataset files are either the 2-D CSV or the pool/patch container.
std::vector<LabeledExample> load_dataset(const std::string& path) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
        return load_moons_csv(path);
    }
    return pool_examples(load_pool(path));
}

std::vector<LabeledExample> filter_label(const std::vector<LabeledExample>& data, int label) {
    std::vector<LabeledExample> out;
    for (const auto& e : data) {
        if (e.label == label) out.push_back(e);
    }
    return out;
}

std::string default_manifest_path(const std::string& primary_output) {
    return primary_output + ".manifest.json";
}

std::string pool_fingerprint(const std::string& model_fp, const json& config, std::uint64_t seed) {
    return hex64(fnv1a64(model_fp + config.dump() + std::to_string(seed)));
}

// ---------------------------------------------------------------- datagen

struct DatagenMoonsOpts {
    std::size_t n = 500;
    double noise_std = 0.15;
    std::uint64_t seed = 0;
    std::size_t subsample_pos = 0;
    double longtail_rate = 3.0;
    std::string out;
};

void cmd_datagen_moons(const DatagenMoonsOpts& o, const std::vector<std::string>& argv) {
    if (o.noise_std < 0) throw ConfigError("--std: must be >= 0");
    ManifestWriter mw("datagen two-moons", argv);
    Rng rng(o.seed);
    auto data = two_moons(o.n, o.noise_std, rng);
    if (o.subsample_pos > 0) {
        std::vector<LabeledExample> positives(data.begin(), data.begin() + static_cast<long>(o.n));
        std::vector<LabeledExample> negatives(data.begin() + static_cast<long>(o.n), data.end());
        Rng sub_rng = rng.child("subsample");
        data = longtail_subsample(positives, o.subsample_pos, sub_rng, o.longtail_rate);
        data.insert(data.end(), negatives.begin(), negatives.end());
    }
    save_moons_csv(o.out, data);
    mw.config(json{{"n", o.n},
                   {"std", o.noise_std},
                   {"seed", o.seed},
                   {"subsample_pos", o.subsample_pos},
                   {"longtail_rate", o.longtail_rate}});
    mw.seed(o.seed);
    mw.output(o.out);
    mw.finish(default_manifest_path(o.out));
}

struct DatagenBlobsOpts {
    std::size_t scenes = 40;
    std::size_t size = 48;
    std::size_t blobs = 2;
    std::size_t small_blobs = 1;
    std::uint64_t seed = 0;
    std::size_t patch_size = 16;
    std::size_t negatives_per_scene = 3;
    double min_relevant_radius = 2.5;
    std::string out_scenes;
    std::string out_patches;
};

void cmd_datagen_blobs(const DatagenBlobsOpts& o, const std::vector<std::string>& argv) {
    ManifestWriter mw("datagen blobs", argv);
    BlobSceneConfig cfg;
    cfg.patch_size = o.size;
    cfg.n_blobs = o.blobs;
    cfg.n_small_blobs = o.small_blobs;
    Rng rng(o.seed);
    std::vector<StoredScene> stored;
    std::vector<PatchScene> scenes;
    for (std::size_t i = 0; i < o.scenes; ++i) {
        Rng scene_rng = rng.child(i);
        PatchScene scene = blob_scene(cfg, scene_rng);
        stored.push_back({"scene" + std::to_string(i), scene.render(), scene.blobs});
        scenes.push_back(std::move(scene));
    }
    save_scenes_json(o.out_scenes, stored);
    mw.output(o.out_scenes);
    if (!o.out_patches.empty()) {
        PatchExtractConfig pcfg;
        pcfg.patch_size = o.patch_size;
        pcfg.min_relevant_radius = o.min_relevant_radius;
        pcfg.negatives_per_scene = o.negatives_per_scene;
        Rng prng = rng.child("patches");
        auto patches = extract_patches(scenes, pcfg, prng);
        Pool pool = pool_from_examples(patches, o.seed);
        pool.config = json{{"patch_size", o.patch_size}, {"scenes", o.scenes}};
        save_pool(o.out_patches, pool);
        mw.output(o.out_patches);
    }
    mw.config(json{{"scenes", o.scenes},
                   {"size", o.size},
                   {"blobs", o.blobs},
                   {"small_blobs", o.small_blobs},
                   {"seed", o.seed},
                   {"patch_size", o.patch_size},
                   {"negatives_per_scene", o.negatives_per_scene},
                   {"min_relevant_radius", o.min_relevant_radius}});
    mw.seed(o.seed);
    mw.finish(default_manifest_path(o.out_scenes));
}

// ------------------------------------------------------------------ train

struct TrainOpts {
    std::string data;
    std::string head = "beta";
    std::string hidden;
    std::string from;
    std::size_t epochs = 60;
    std::size_t batch = 16;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    std::size_t anneal = 20;
    std::size_t patience = 10;
    double val_frac = 0.1;
    std::string out;
};

void cmd_train(const TrainOpts& o, const std::vector<std::string>& argv) {
    require_input_file(o.data, "--data");
    ManifestWriter mw("train", argv);
    mw.input(o.data);
    auto data = load_dataset(o.data);
    if (data.empty()) throw ConfigError("--data: dataset is empty");
    HeadKind head = head_from_name(o.head);

    Classifier model;
    CheckpointMeta meta;
    if (!o.from.empty()) {
        require_input_file(o.from, "--from");
        mw.input(o.from);
        CheckpointMeta from_meta;
        Classifier base = load_classifier(o.from, &from_meta);
        std::string base_fp = model_fingerprint(base);
        if (base.head == head) {
            model = std::move(base);
        } else if (base.head == HeadKind::cross_entropy && head == HeadKind::beta) {
            Rng hrng = Rng(o.seed).child("beta-head");
            model = with_beta_head(base, hrng);
        } else {
            throw ConfigError("--from: cannot stage from head '" + std::string(head_name(base.head)) +
                              "' to '" + o.head + "'");
        }
        meta.seed_lineage = from_meta.seed_lineage;
        meta.baseline_path = o.from;
        meta.baseline_fingerprint = base_fp;
    } else {
        std::size_t input_dim = data.front().x.size();
        std::vector<std::size_t> hidden =
            o.hidden.empty() ? (input_dim <= 4 ? std::vector<std::size_t>{32, 16}
                                               : std::vector<std::size_t>{64, 32})
                             : parse_hidden(o.hidden);
        Rng mrng = Rng(o.seed).child("init");
        model = Classifier::make(hidden, input_dim, head, mrng);
    }
    meta.seed_lineage.push_back(o.seed);

    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.seed = o.seed;
    cfg.lr = o.lr;
    cfg.anneal_epochs = o.anneal;
    cfg.patience = o.patience;
    cfg.val_fraction = o.val_frac;
    TrainHistory history = train_baseline(model, data, cfg);

    save_classifier(o.out, model, meta);
    mw.config(json{{"data", o.data},
                   {"head", o.head},
                   {"from", o.from},
                   {"epochs", o.epochs},
                   {"batch", o.batch},
                   {"seed", o.seed},
                   {"lr", o.lr},
                   {"anneal", o.anneal},
                   {"patience", o.patience},
                   {"val_frac", o.val_frac},
                   {"history", history_to_json(history)},
                   {"fingerprint", model_fingerprint(model)}});
    mw.seed(o.seed);
    mw.output(o.out);
    mw.finish(default_manifest_path(o.out));
}

// --------------------------------------------------------------- finetune

struct FinetuneOpts {
    std::string model;
    std::string data;
    std::string schedule = "augment";
    std::string pool_syn, pool_perturb, pool_noise;
    std::size_t epochs = 30;
    std::size_t batch = 16;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    std::size_t anneal = 20;
    std::size_t patience = 10;
    double poisson_scale = 50.0;
    bool allow_foreign_pools = false;
    std::string out;
};

SamplingSchedule schedule_from_name(const std::string& name) {
    if (name == "augment") return SamplingSchedule::augment();
    if (name == "baseline") return SamplingSchedule::baseline();
    if (name == "syn-only") return SamplingSchedule::syn_only();
    if (name == "perturb-only") return SamplingSchedule::perturb_only();
    if (name == "poisson") return SamplingSchedule::poisson_mode();
    throw ConfigError("--schedule: unknown schedule: " + name);
}

void cmd_finetune(const FinetuneOpts& o, const std::vector<std::string>& argv) {
    require_input_file(o.model, "--model");
    require_input_file(o.data, "--data");
    ManifestWriter mw("finetune", argv);
    mw.input(o.model);
    mw.input(o.data);

    CheckpointMeta base_meta;
    Classifier model = load_classifier(o.model, &base_meta);
    std::string base_fp = model_fingerprint(model);
    auto data = load_dataset(o.data);

    AugmentationPools pools;
    auto load_pool_into = [&](const std::string& path, const char* flag,
                              std::vector<LabeledExample>& slot) {
        if (path.empty()) return;
        require_input_file(path, flag);
        mw.input(path);
        Pool pool = load_pool(path);
        if (!pool.source_model.empty() && pool.source_model != base_fp && !o.allow_foreign_pools) {
            throw ConfigError(std::string(flag) + ": pool was generated against model " +
                              pool.source_model + ", not this baseline (" + base_fp +
                              "); pass --allow-foreign-pools to override");
        }
        slot = pool_examples(pool);
    };
    load_pool_into(o.pool_syn, "--pool-syn", pools.synthetic);
    load_pool_into(o.pool_perturb, "--pool-perturb", pools.perturbed);
    load_pool_into(o.pool_noise, "--pool-noise", pools.noise);

    SamplingSchedule schedule = schedule_from_name(o.schedule);
    schedule.poisson_scale = o.poisson_scale;

    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.seed = o.seed;
    cfg.lr = o.lr;
    cfg.anneal_epochs = o.anneal;
    cfg.patience = o.patience;
    TrainHistory history = finetune_augmented(model, data, pools, schedule, cfg);

    CheckpointMeta meta = base_meta;
    meta.seed_lineage.push_back(o.seed);
    meta.baseline_path = o.model;
    meta.baseline_fingerprint = base_fp;
    save_classifier(o.out, model, meta);

    mw.config(json{{"model", o.model},
                   {"data", o.data},
                   {"schedule", o.schedule},
                   {"epochs", o.epochs},
                   {"batch", o.batch},
                   {"seed", o.seed},
                   {"poisson_scale", o.poisson_scale},
                   {"history", history_to_json(history)},
                   {"baseline_fingerprint", base_fp},
                   {"fingerprint", model_fingerprint(model)}});
    mw.seed(o.seed);
    mw.output(o.out);
    mw.finish(default_manifest_path(o.out));
}

// ------------------------------------------------------------ train-synth

struct TrainSynthOpts {
    std::string data;
    std::size_t latent_dim = 2;
    std::size_t hidden = 16;
    std::size_t epochs = 150;
    std::size_t batch = 10;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    int n_critic = 5;
    std::string output_act = "auto";
    std::string out;
};

void cmd_train_synth(const TrainSynthOpts& o, const std::vector<std::string>& argv) {
    require_input_file(o.data, "--data");
    ManifestWriter mw("train-synth", argv);
    mw.input(o.data);
    auto data = filter_label(load_dataset(o.data), 1);
    if (data.size() < 2) throw ConfigError("--data: need at least 2 positive examples");
    Tensor features = stack_features(data);

    Activation out_act;
    if (o.output_act == "auto") {
        out_act = features.cols() == 2 ? Activation::identity : Activation::sigmoid;
    } else {
        out_act = activation_from_name(o.output_act);
    }
    Rng brng = Rng(o.seed).child("init");
    SynthesizerBundle bundle =
        SynthesizerBundle::make(features.cols(), o.latent_dim, o.hidden, out_act, brng);
    SynthTrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.seed = o.seed;
    cfg.lr = o.lr;
    cfg.n_critic = o.n_critic;
    auto history = train_synthesizer(bundle, features, cfg);

    CheckpointMeta meta;
    meta.seed_lineage = {o.seed};
    save_synthesizer(o.out, bundle, meta);

    json hist = json::array();
    for (const auto& e : history) {
        hist.push_back({{"critic", e.critic_loss},
                        {"gen", e.gen_loss},
                        {"recon", e.reconstruction},
                        {"kl", e.kl}});
    }
    mw.config(json{{"data", o.data},
                   {"latent_dim", o.latent_dim},
                   {"hidden", o.hidden},
                   {"epochs", o.epochs},
                   {"batch", o.batch},
                   {"seed", o.seed},
                   {"n_critic", o.n_critic},
                   {"output_act", o.output_act},
                   {"history", std::move(hist)},
                   {"fingerprint", model_fingerprint(bundle)}});
    mw.seed(o.seed);
    mw.output(o.out);
    mw.finish(default_manifest_path(o.out));
}

// ----------------------------------------------------------------- attack

struct AttackOpts {
    std::string model;
    std::string mode;
    std::string generator;
    std::string data;
    std::string backgrounds;
    std::size_t count = 100;
    double eps = 0.15;
    double alpha = 0.05;
    int iters = 20;
    std::string norm = "linf";
    int label = 1;
    double mask_threshold = 0.5;
    std::string range_lo = "0";
    std::string range_hi = "1";
    std::string shape;
    std::uint64_t seed = 0;
    std::string out;
};

Tensor parse_range(const std::string& s, const Shape& shape, const char* flag) {
    auto items = split_csv_list(s);
    std::vector<double> vals;
    for (const auto& item : items) {
        try {
            vals.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError(std::string(flag) + ": not a number: " + item);
        }
    }
    std::size_t n = shape_numel(shape);
    if (vals.size() == 1) return Tensor::full(shape, vals[0]);
    if (vals.size() == n) return Tensor::from(shape, std::move(vals));
    throw ConfigError(std::string(flag) + ": expected 1 or " + std::to_string(n) + " values");
}

void cmd_attack(const AttackOpts& o, const std::vector<std::string>& argv) {
    require_input_file(o.model, "--model");
    ManifestWriter mw("attack", argv);
    mw.input(o.model);
    Classifier model = load_classifier(o.model);
    std::string model_fp = model_fingerprint(model);

    AttackConfig cfg;
    cfg.epsilon = o.eps;
    cfg.alpha = o.alpha;
    cfg.iterations = o.iters;
    cfg.norm = attack_norm_from_name(o.norm);
    cfg.validate();

    json config{{"mode", o.mode},   {"eps", o.eps},   {"alpha", o.alpha}, {"iters", o.iters},
                {"norm", o.norm},   {"count", o.count}, {"seed", o.seed},   {"label", o.label}};

    Pool pool;
    pool.source_model = model_fp;
    pool.seed = o.seed;
    Rng master(o.seed);

    if (o.mode == "latent") {
        require_input_file(o.generator, "--generator");
        mw.input(o.generator);
        SynthesizerBundle synth = load_synthesizer(o.generator);
        std::vector<LabeledExample> backgrounds;
        if (!o.backgrounds.empty()) {
            require_input_file(o.backgrounds, "--backgrounds");
            mw.input(o.backgrounds);
            backgrounds = filter_label(load_dataset(o.backgrounds), 0);
            if (backgrounds.empty()) {
                throw ConfigError("--backgrounds: no negative patches to fuse into");
            }
        }
        config["generator_fingerprint"] = model_fingerprint(synth);
        for (std::size_t i = 0; i < o.count; ++i) {
            Rng worker = master.child(i);
            Tensor z0 = standard_normal({synth.latent_dim}, worker);
            FusionSpec fusion;
            Shape payload_shape;
            if (!backgrounds.empty()) {
                fusion.enabled = true;
                fusion.threshold = o.mask_threshold;
                const Tensor& bg = backgrounds[i % backgrounds.size()].x;
                payload_shape = bg.shape();
                fusion.background = Tensor::from(
                    {bg.size()}, std::vector<double>(bg.data().begin(), bg.data().end()));
            }
            AttackResult r = attack_latent(synth, model, z0, fusion, cfg, worker);
            Tensor payload = r.sample;
            if (!payload_shape.empty()) {
                payload = Tensor::from(payload_shape, std::vector<double>(r.sample.data().begin(),
                                                                          r.sample.data().end()));
            }
            pool.records.push_back({Source::synthetic_pgd, 1, payload, worker.seed(), model_fp});
        }
    } else if (o.mode == "patch") {
        require_input_file(o.data, "--data");
        mw.input(o.data);
        auto patches = filter_label(load_dataset(o.data), o.label);
        if (patches.empty()) {
            throw ConfigError("--data: no examples carry label " + std::to_string(o.label));
        }
        for (std::size_t i = 0; i < o.count; ++i) {
            Rng worker = master.child(i);
            const auto& src = patches[i % patches.size()];
            AttackResult r = attack_patch(model, src.x, src.label, cfg, worker);
            pool.records.push_back({Source::perturbed, src.label, r.sample, worker.seed(), model_fp});
        }
    } else if (o.mode == "noise") {
        Shape shape;
        if (!o.shape.empty()) {
            for (const auto& item : split_csv_list(o.shape)) {
                try {
                    shape.push_back(static_cast<std::size_t>(std::stoul(item)));
                } catch (const std::exception&) {
                    throw ConfigError("--shape: not an extent: " + item);
                }
            }
        } else {
            shape = {model.input_dim()};
        }
        if (shape_numel(shape) != model.input_dim()) {
            throw ConfigError("--shape: does not match the model input extent");
        }
        Tensor lo = parse_range(o.range_lo, shape, "--range-lo");
        Tensor hi = parse_range(o.range_hi, shape, "--range-hi");
        config["shape"] = shape;
        for (std::size_t i = 0; i < o.count; ++i) {
            Rng worker = master.child(i);
            AttackResult r = attack_from_noise(model, shape, lo, hi, cfg, worker);
            pool.records.push_back({Source::noise, 0, r.sample, worker.seed(), model_fp});
        }
    } else {
        throw ConfigError("--mode: must be latent, patch, or noise");
    }

    pool.config = config;
    pool.config["pool_fingerprint"] = pool_fingerprint(model_fp, config, o.seed);
    save_pool(o.out, pool);
    mw.config(pool.config);
    mw.seed(o.seed);
    mw.output(o.out);
    mw.finish(default_manifest_path(o.out));
}

// ----------------------------------------------------------------- detect

struct DetectOpts {
    std::string model;
    std::string scenes;
    double min_relevant_radius = 2.5;
    double min_distance = 6.0;
    std::size_t max_candidates = 12;
    std::size_t patch_size = 16;
    std::string out_candidates;
    std::string out_groundtruth;
};

void cmd_detect(const DetectOpts& o, const std::vector<std::string>& argv) {
    require_input_file(o.model, "--model");
    require_input_file(o.scenes, "--scenes");
    ManifestWriter mw("detect", argv);
    mw.input(o.model);
    mw.input(o.scenes);
    Classifier model = load_classifier(o.model);
    auto scenes = load_scenes_json(o.scenes);

    std::vector<Candidate> candidates;
    std::vector<GroundTruth> gts;
    for (const auto& scene : scenes) {
        Tensor heat = box_blur3(scene.image);
        auto peaks = nms(heat, o.min_distance, o.max_candidates, scene.id);
        for (const auto& p : peaks) {
            Tensor crop = crop_window(scene.image, p.x, p.y, o.patch_size);
            candidates.push_back({scene.id, p.x, p.y, model.confidence(crop)});
        }
        for (const auto& b : scene.blobs) {
            gts.push_back({scene.id, b.cx, b.cy, std::max(b.radius, 1.0),
                           b.radius >= o.min_relevant_radius});
        }
    }
    save_candidates_csv(o.out_candidates, candidates);
    save_groundtruth_csv(o.out_groundtruth, gts);
    mw.config(json{{"model", o.model},
                   {"scenes", o.scenes},
                   {"min_relevant_radius", o.min_relevant_radius},
                   {"min_distance", o.min_distance},
                   {"max_candidates", o.max_candidates},
                   {"patch_size", o.patch_size},
                   {"scene_count", scenes.size()}});
    mw.output(o.out_candidates);
    mw.output(o.out_groundtruth);
    mw.finish(default_manifest_path(o.out_candidates));
}

// --------------------------------------------------------------- evaluate

struct EvaluateOpts {
    std::string candidates;
    std::string groundtruth;
    std::size_t scans = 0; // 0 = derive from the files
    int bootstrap = 1000;
    std::uint64_t seed = 0;
    std::string out;
};

void cmd_evaluate(const EvaluateOpts& o, const std::vector<std::string>& argv) {
    require_input_file(o.candidates, "--candidates");
    require_input_file(o.groundtruth, "--groundtruth");
    ManifestWriter mw("evaluate", argv);
    mw.input(o.candidates);
    mw.input(o.groundtruth);
    auto cands = load_candidates_csv(o.candidates);
    auto gts = load_groundtruth_csv(o.groundtruth);

    std::vector<std::string> scan_ids;
    for (const auto& c : cands) scan_ids.push_back(c.scan_id);
    for (const auto& g : gts) scan_ids.push_back(g.scan_id);
    std::sort(scan_ids.begin(), scan_ids.end());
    scan_ids.erase(std::unique(scan_ids.begin(), scan_ids.end()), scan_ids.end());
    std::size_t scan_count = o.scans > 0 ? o.scans : scan_ids.size();
    if (scan_count == 0) throw ConfigError("no scans found in the inputs");

    MatchResult matches = match(cands, gts);
    FrocCurve curve = froc(cands, matches, scan_count);
    CpmScore score = cpm(curve);

    json report;
    report["scan_count"] = scan_count;
    report["total_relevant"] = curve.total_relevant;
    json points = json::array();
    for (const auto& p : curve.points) points.push_back({p.fp_per_scan, p.sensitivity});
    report["curve"] = std::move(points);
    json ops = json::object();
    for (std::size_t i = 0; i < kCpmOperatingPoints.size(); ++i) {
        char key[16];
        std::snprintf(key, sizeof key, "%g", kCpmOperatingPoints[i]);
        ops[key] = score.sensitivities[i];
    }
    report["operating_points"] = std::move(ops);
    report["cpm"] = score.mean;
    if (o.bootstrap > 0) {
        Rng rng(o.seed);
        BootstrapCi ci = cpm_bootstrap_ci(cands, gts, scan_ids, o.bootstrap, rng);
        report["ci"] = {{"lo", ci.lo}, {"hi", ci.hi}, {"resamples", ci.resamples}};
    }
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + o.out);
    out << report.dump(2) << "\n";
    if (!out.good()) throw IoError("write failed: " + o.out);

    mw.config(json{{"candidates", o.candidates},
                   {"groundtruth", o.groundtruth},
                   {"scans", scan_count},
                   {"bootstrap", o.bootstrap},
                   {"seed", o.seed},
                   {"cpm", score.mean}});
    mw.seed(o.seed);
    mw.output(o.out);
    mw.finish(default_manifest_path(o.out));
    std::printf("cpm %.6f over %zu scans\n", score.mean, scan_count);
}

// ----------------------------------------------------------------- stress

struct StressOpts {
    std::string model;
    std::string protocol = "all";
    std::string data;
    std::string source_model;
    std::string generator;
    std::size_t count = 200;
    double eps = 0.15;
    double alpha = 0.05;
    int iters = 20;
    std::string range_lo = "0";
    std::string range_hi = "1";
    std::uint64_t seed = 0;
    std::string out;
};

void cmd_stress(const StressOpts& o, const std::vector<std::string>& argv) {
    require_input_file(o.model, "--model");
    ManifestWriter mw("stress", argv);
    mw.input(o.model);
    CheckpointMeta meta;
    Classifier model = load_classifier(o.model, &meta);

    AttackConfig cfg;
    cfg.epsilon = o.eps;
    cfg.alpha = o.alpha;
    cfg.iterations = o.iters;

    auto need_positives = [&]() {
        require_input_file(o.data, "--data");
        auto pos = filter_label(load_dataset(o.data), 1);
        if (pos.empty()) throw ConfigError("--data: no positive patches for this protocol");
        return pos;
    };
    // The attack source defaults to the model's baseline ancestor; a model
    // without one is its own baseline.
    auto load_source = [&]() -> Classifier {
        std::string path = o.source_model;
        if (path.empty()) path = meta.baseline_path;
        if (path.empty()) return model;
        require_input_file(path, "--source-model");
        mw.input(path);
        return load_classifier(path);
    };

    json entries = json::array();
    auto add_entry = [&](const std::string& name, const StressSummary& s) {
        entries.push_back({{"name", name}, {"mean", s.mean}, {"std", s.stddev}, {"n", s.n}});
    };

    Rng master(o.seed);
    bool all = o.protocol == "all";

    if (all || o.protocol == "uniform") {
        auto positives = need_positives();
        mw.input(o.data);
        for (double mag : {0.0, 0.3, 0.6, 0.9}) {
            Rng rng = master.child("uniform-" + std::to_string(mag));
            std::vector<double> conf;
            for (const auto& e : positives) {
                conf.push_back(model.confidence(uniform_noise_inject(e.x, mag, rng)));
            }
            char name[32];
            std::snprintf(name, sizeof name, "uniform-%.1f", mag);
            add_entry(name, stress_summary(conf));
        }
    }
    if (all || o.protocol == "poisson") {
        auto positives = need_positives();
        for (double scale : {50.0, 1.0}) {
            Rng rng = master.child("poisson-" + std::to_string(scale));
            std::vector<double> conf;
            for (const auto& e : positives) {
                conf.push_back(model.confidence(poisson_noise_inject(e.x, scale, rng)));
            }
            add_entry(scale == 50.0 ? "poisson-x50" : "poisson-x5", stress_summary(conf));
        }
    }
    if (all || o.protocol == "adv-patch") {
        auto positives = need_positives();
        Classifier source = load_source();
        Rng rng = master.child("adv-patch");
        std::vector<double> clean, attacked;
        for (std::size_t i = 0; i < std::min(o.count, positives.size()); ++i) {
            Rng worker = rng.child(i);
            AttackResult r = attack_patch(source, positives[i].x, 1, cfg, worker);
            clean.push_back(model.confidence(positives[i].x));
            attacked.push_back(model.confidence(r.sample));
        }
        add_entry("clean-positives", stress_summary(clean));
        add_entry("adv-perturbed-positives", stress_summary(attacked));
    }
    if (all || o.protocol == "adv-noise") {
        Classifier source = load_source();
        Shape shape{model.input_dim()};
        Tensor lo = parse_range(o.range_lo, shape, "--range-lo");
        Tensor hi = parse_range(o.range_hi, shape, "--range-hi");
        Rng rng = master.child("adv-noise");
        std::vector<double> raw, attacked;
        for (std::size_t i = 0; i < o.count; ++i) {
            Rng worker = rng.child(i);
            AttackResult r = attack_from_noise(source, shape, lo, hi, cfg, worker);
            std::vector<double> noise(model.input_dim());
            Rng raw_rng = worker.child("raw");
            for (std::size_t k = 0; k < noise.size(); ++k) noise[k] = raw_rng.uniform(lo[k], hi[k]);
            raw.push_back(model.confidence(Tensor::from(shape, std::move(noise))));
            attacked.push_back(model.confidence(r.sample));
        }
        add_entry("uniform-noise", stress_summary(raw));
        add_entry("pgd-noise", stress_summary(attacked));
    }
    if (all || o.protocol == "syn-random" || o.protocol == "syn-pgd") {
        require_input_file(o.generator, "--generator");
        mw.input(o.generator);
        SynthesizerBundle synth = load_synthesizer(o.generator);
        if (all || o.protocol == "syn-random") {
            Rng rng = master.child("syn-random");
            std::vector<double> conf;
            for (std::size_t i = 0; i < o.count; ++i) {
                conf.push_back(
                    model.confidence(generate(synth, standard_normal({synth.latent_dim}, rng))));
            }
            add_entry("syn-random", stress_summary(conf));
        }
        if (all || o.protocol == "syn-pgd") {
            Classifier source = load_source();
            Rng rng = master.child("syn-pgd");
            std::vector<double> conf;
            for (std::size_t i = 0; i < o.count; ++i) {
                Rng worker = rng.child(i);
                Tensor z0 = standard_normal({synth.latent_dim}, worker);
                AttackResult r = attack_latent(synth, source, z0, {}, cfg, worker);
                conf.push_back(model.confidence(r.sample));
            }
            add_entry("syn-pgd", stress_summary(conf));
        }
    }
    if (entries.empty()) {
        throw ConfigError("--protocol: unknown protocol: " + o.protocol);
    }

    json report{{"model", o.model}, {"protocol", o.protocol}, {"entries", std::move(entries)}};
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + o.out);
    out << report.dump(2) << "\n";
    if (!out.good()) throw IoError("write failed: " + o.out);

    mw.config(json{{"model", o.model},
                   {"protocol", o.protocol},
                   {"data", o.data},
                   {"source_model", o.source_model},
                   {"generator", o.generator},
                   {"count", o.count},
                   {"eps", o.eps},
                   {"alpha", o.alpha},
                   {"iters", o.iters},
                   {"range_lo", o.range_lo},
                   {"range_hi", o.range_hi},
                   {"seed", o.seed}});
    mw.seed(o.seed);
    mw.output(o.out);
    mw.finish(default_manifest_path(o.out));
}

// ---------------------------------------------------------- plot-boundary

struct PlotOpts {
    std::string model;
    std::string data;
    std::size_t grid = 200;
    std::string box;
    std::string out;
    bool six_panel = false;
    std::uint64_t seed = 0;
    std::size_t epochs = 80;
    std::string out_dir;
};

void cmd_plot(const PlotOpts& o, const std::vector<std::string>& argv) {
    if (o.six_panel) {
        if (o.out_dir.empty()) throw ConfigError("--out-dir: required with --six-panel");
        ManifestWriter mw("plot-boundary six-panel", argv);
        FigureConfig cfg;
        cfg.seed = o.seed;
        cfg.train.epochs = o.epochs;
        cfg.grid_cells = o.grid;
        FigureResult result = run_figure_pipeline(cfg);
        auto files = write_figure_outputs(result, o.out_dir);
        for (const auto& f : files) mw.output(f);
        mw.config(json{{"seed", o.seed}, {"epochs", o.epochs}, {"grid", o.grid},
                       {"out_dir", o.out_dir}});
        mw.seed(o.seed);
        mw.finish((fs::path(o.out_dir) / "run.manifest.json").string());
        return;
    }
    if (o.model.empty() || o.out.empty()) {
        throw ConfigError("plot-boundary: --model and --out are required (or use --six-panel)");
    }
    require_input_file(o.model, "--model");
    ManifestWriter mw("plot-boundary", argv);
    mw.input(o.model);
    Classifier model = load_classifier(o.model);
    std::vector<LabeledExample> overlay;
    if (!o.data.empty()) {
        require_input_file(o.data, "--data");
        mw.input(o.data);
        overlay = load_dataset(o.data);
    }
    GridSpec grid;
    grid.nx = grid.ny = o.grid;
    if (!o.box.empty()) {
        auto parts = split_csv_list(o.box);
        if (parts.size() != 4) throw ConfigError("--box: expected x_lo,x_hi,y_lo,y_hi");
        try {
            grid.x_lo = std::stod(parts[0]);
            grid.x_hi = std::stod(parts[1]);
            grid.y_lo = std::stod(parts[2]);
            grid.y_hi = std::stod(parts[3]);
        } catch (const std::exception&) {
            throw ConfigError("--box: malformed number");
        }
    }
    write_boundary_svg(o.out, model, grid, overlay);
    mw.config(json{{"model", o.model}, {"data", o.data}, {"grid", o.grid}, {"box", o.box}});
    mw.output(o.out);
    mw.finish(default_manifest_path(o.out));
}

// ----------------------------------------------------------------- replay

void cmd_replay(const std::string& manifest_path, int depth) {
    require_input_file(manifest_path, "--manifest");
    RunManifest m = load_manifest(manifest_path);
    if (depth > 1) throw ConfigError("replay: nested replay is not supported");
    for (const auto& [path, fp] : m.inputs) {
        require_input_file(path, "replay input");
        std::string now = file_fingerprint(path);
        if (now != fp) {
            throw ConfigError("replay: input " + path + " changed since the recorded run (" + now +
                              " != " + fp + ")");
        }
    }
    int rc = run_cli(m.argv, depth + 1);
    if (rc != 0) {
        throw ConfigError("replay: inner command failed with exit code " + std::to_string(rc));
    }
}

// ------------------------------------------------------------------- main

int run_cli(const std::vector<std::string>& args, int depth) {
    CLI::App app{"adversarial-augmentation laboratory"};
    app.require_subcommand(1);

    auto* datagen = app.add_subcommand("datagen", "generate datasets");
    datagen->require_subcommand(1);
    DatagenMoonsOpts moons;
    auto* moons_cmd = datagen->add_subcommand("two-moons", "two interleaving half circles");
    moons_cmd->add_option("--n", moons.n, "points per class")->default_val(500);
    moons_cmd->add_option("--std", moons.noise_std, "gaussian noise std")
        ->default_val(0.15)
        ->check(CLI::NonNegativeNumber);
    moons_cmd->add_option("--seed", moons.seed, "master seed")->required();
    moons_cmd->add_option("--subsample-pos", moons.subsample_pos, "long-tail positive subsample");
    moons_cmd->add_option("--longtail-rate", moons.longtail_rate, "subsample decay rate");
    moons_cmd->add_option("--out", moons.out, "output csv")->required();

    DatagenBlobsOpts blobs;
    auto* blobs_cmd = datagen->add_subcommand("blobs", "procedural blob scenes");
    blobs_cmd->add_option("--scenes", blobs.scenes)->default_val(40);
    blobs_cmd->add_option("--size", blobs.size)->default_val(48);
    blobs_cmd->add_option("--blobs", blobs.blobs)->default_val(2);
    blobs_cmd->add_option("--small-blobs", blobs.small_blobs)->default_val(1);
    blobs_cmd->add_option("--seed", blobs.seed)->required();
    blobs_cmd->add_option("--patch-size", blobs.patch_size)->default_val(16);
    blobs_cmd->add_option("--negatives-per-scene", blobs.negatives_per_scene)->default_val(3);
    blobs_cmd->add_option("--min-relevant-radius", blobs.min_relevant_radius)->default_val(2.5);
    blobs_cmd->add_option("--out-scenes", blobs.out_scenes)->required();
    blobs_cmd->add_option("--out-patches", blobs.out_patches);

    TrainOpts train;
    auto* train_cmd = app.add_subcommand("train", "train a baseline classifier");
    train_cmd->add_option("--data", train.data)->required();
    train_cmd->add_option("--head", train.head)->default_val("beta");
    train_cmd->add_option("--hidden", train.hidden, "comma-separated layer widths");
    train_cmd->add_option("--from", train.from, "checkpoint to continue from (CE->beta staging)");
    train_cmd->add_option("--epochs", train.epochs)->default_val(60);
    train_cmd->add_option("--batch", train.batch)->default_val(16);
    train_cmd->add_option("--seed", train.seed)->required();
    train_cmd->add_option("--lr", train.lr)->default_val(1e-3);
    train_cmd->add_option("--anneal", train.anneal)->default_val(20);
    train_cmd->add_option("--patience", train.patience)->default_val(10);
    train_cmd->add_option("--val-frac", train.val_frac)->default_val(0.1);
    train_cmd->add_option("--out", train.out)->required();

    FinetuneOpts ft;
    auto* ft_cmd = app.add_subcommand("finetune", "finetune with augmentation pools");
    ft_cmd->add_option("--model", ft.model)->required();
    ft_cmd->add_option("--data", ft.data)->required();
    ft_cmd->add_option("--schedule", ft.schedule)->default_val("augment");
    ft_cmd->add_option("--pool-syn", ft.pool_syn);
    ft_cmd->add_option("--pool-perturb", ft.pool_perturb);
    ft_cmd->add_option("--pool-noise", ft.pool_noise);
    ft_cmd->add_option("--epochs", ft.epochs)->default_val(30);
    ft_cmd->add_option("--batch", ft.batch)->default_val(16);
    ft_cmd->add_option("--seed", ft.seed)->required();
    ft_cmd->add_option("--lr", ft.lr)->default_val(1e-3);
    ft_cmd->add_option("--anneal", ft.anneal)->default_val(20);
    ft_cmd->add_option("--patience", ft.patience)->default_val(10);
    ft_cmd->add_option("--poisson-scale", ft.poisson_scale)->default_val(50.0);
    ft_cmd->add_flag("--allow-foreign-pools", ft.allow_foreign_pools);
    ft_cmd->add_option("--out", ft.out)->required();

    TrainSynthOpts ts;
    auto* ts_cmd = app.add_subcommand("train-synth", "train the VAE/WGAN-GP synthesizer");
    ts_cmd->add_option("--data", ts.data)->required();
    ts_cmd->add_option("--latent-dim", ts.latent_dim)->default_val(2);
    ts_cmd->add_option("--hidden", ts.hidden)->default_val(16);
    ts_cmd->add_option("--epochs", ts.epochs)->default_val(150);
    ts_cmd->add_option("--batch", ts.batch)->default_val(10);
    ts_cmd->add_option("--seed", ts.seed)->required();
    ts_cmd->add_option("--lr", ts.lr)->default_val(1e-3);
    ts_cmd->add_option("--n-critic", ts.n_critic)->default_val(5);
    ts_cmd->add_option("--output-act", ts.output_act)->default_val("auto");
    ts_cmd->add_option("--out", ts.out)->required();

    AttackOpts atk;
    auto* atk_cmd = app.add_subcommand("attack", "generate an augmentation pool by PGD");
    atk_cmd->add_option("--model", atk.model)->required();
    atk_cmd->add_option("--mode", atk.mode)
        ->required()
        ->check(CLI::IsMember({"latent", "patch", "noise"}));
    atk_cmd->add_option("--generator", atk.generator);
    atk_cmd->add_option("--data", atk.data);
    atk_cmd->add_option("--backgrounds", atk.backgrounds);
    atk_cmd->add_option("--count", atk.count)->default_val(100);
    atk_cmd->add_option("--eps", atk.eps)->default_val(0.15);
    atk_cmd->add_option("--alpha", atk.alpha)->default_val(0.05);
    atk_cmd->add_option("--iters", atk.iters)->default_val(20);
    atk_cmd->add_option("--norm", atk.norm)->default_val("linf");
    atk_cmd->add_option("--label", atk.label)->default_val(1);
    atk_cmd->add_option("--mask-threshold", atk.mask_threshold)->default_val(0.5);
    atk_cmd->add_option("--range-lo", atk.range_lo)->default_val("0");
    atk_cmd->add_option("--range-hi", atk.range_hi)->default_val("1");
    atk_cmd->add_option("--shape", atk.shape, "payload shape, e.g. 16,16");
    atk_cmd->add_option("--seed", atk.seed)->required();
    atk_cmd->add_option("--out", atk.out)->required();

    DetectOpts det;
    auto* det_cmd = app.add_subcommand("detect", "candidates + groundtruth from scenes");
    det_cmd->add_option("--model", det.model)->required();
    det_cmd->add_option("--scenes", det.scenes)->required();
    det_cmd->add_option("--min-relevant-radius", det.min_relevant_radius)->default_val(2.5);
    det_cmd->add_option("--min-distance", det.min_distance)->default_val(6.0);
    det_cmd->add_option("--max-candidates", det.max_candidates)->default_val(12);
    det_cmd->add_option("--patch-size", det.patch_size)->default_val(16);
    det_cmd->add_option("--out-candidates", det.out_candidates)->required();
    det_cmd->add_option("--out-groundtruth", det.out_groundtruth)->required();

    EvaluateOpts ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "FROC/CPM report");
    ev_cmd->add_option("--candidates", ev.candidates)->required();
    ev_cmd->add_option("--groundtruth", ev.groundtruth)->required();
    ev_cmd->add_option("--scans", ev.scans)->default_val(0);
    ev_cmd->add_option("--bootstrap", ev.bootstrap)->default_val(1000);
    ev_cmd->add_option("--seed", ev.seed)->default_val(0);
    ev_cmd->add_option("--out", ev.out)->required();

    StressOpts st;
    auto* st_cmd = app.add_subcommand("stress", "stress-test protocols");
    st_cmd->add_option("--model", st.model)->required();
    st_cmd->add_option("--protocol", st.protocol)
        ->default_val("all")
        ->check(CLI::IsMember(
            {"uniform", "poisson", "adv-noise", "adv-patch", "syn-random", "syn-pgd", "all"}));
    st_cmd->add_option("--data", st.data);
    st_cmd->add_option("--source-model", st.source_model);
    st_cmd->add_option("--generator", st.generator);
    st_cmd->add_option("--count", st.count)->default_val(200);
    st_cmd->add_option("--eps", st.eps)->default_val(0.15);
    st_cmd->add_option("--alpha", st.alpha)->default_val(0.05);
    st_cmd->add_option("--iters", st.iters)->default_val(20);
    st_cmd->add_option("--range-lo", st.range_lo)->default_val("0");
    st_cmd->add_option("--range-hi", st.range_hi)->default_val("1");
    st_cmd->add_option("--seed", st.seed)->required();
    st_cmd->add_option("--out", st.out)->required();

    PlotOpts plot;
    auto* plot_cmd = app.add_subcommand("plot-boundary", "decision-boundary SVG");
    plot_cmd->add_option("--model", plot.model);
    plot_cmd->add_option("--data", plot.data);
    plot_cmd->add_option("--grid", plot.grid)->default_val(200);
    plot_cmd->add_option("--box", plot.box, "x_lo,x_hi,y_lo,y_hi");
    plot_cmd->add_option("--out", plot.out);
    plot_cmd->add_flag("--six-panel", plot.six_panel, "run the full six-panel toy study");
    plot_cmd->add_option("--seed", plot.seed)->default_val(0);
    plot_cmd->add_option("--epochs", plot.epochs)->default_val(80);
    plot_cmd->add_option("--out-dir", plot.out_dir);

    std::string replay_manifest;
    auto* replay_cmd = app.add_subcommand("replay", "re-run a recorded manifest");
    replay_cmd->add_option("--manifest", replay_manifest)->required();

    const std::vector<std::string> argv_copy = args;

    moons_cmd->callback([&]() { cmd_datagen_moons(moons, argv_copy); });
    blobs_cmd->callback([&]() { cmd_datagen_blobs(blobs, argv_copy); });
    train_cmd->callback([&]() { cmd_train(train, argv_copy); });
    ft_cmd->callback([&]() { cmd_finetune(ft, argv_copy); });
    ts_cmd->callback([&]() { cmd_train_synth(ts, argv_copy); });
    atk_cmd->callback([&]() { cmd_attack(atk, argv_copy); });
    det_cmd->callback([&]() { cmd_detect(det, argv_copy); });
    ev_cmd->callback([&]() { cmd_evaluate(ev, argv_copy); });
    st_cmd->callback([&]() { cmd_stress(st, argv_copy); });
    plot_cmd->callback([&]() { cmd_plot(plot, argv_copy); });
    replay_cmd->callback([&]() { cmd_replay(replay_manifest, depth); });

    std::vector<std::string> cli_args{"advaug"};
    cli_args.insert(cli_args.end(), args.begin(), args.end());
    std::vector<char*> raw;
    raw.reserve(cli_args.size());
    for (auto& s : cli_args) raw.push_back(s.data());

    try {
        app.parse(static_cast<int>(raw.size()), raw.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 4;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, 0);
}
