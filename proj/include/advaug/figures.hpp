#pragma once

#include <array>
#include <string>

#include <json.hpp>

#include "advaug/attack.hpp"
#include "advaug/svg.hpp"
#include "advaug/trainer.hpp"

namespace advaug {

// The six-panel toy study: (a) full data, (b) long-tail subsample,
// (c) +random synthetic positives, (d) +uniform noise negatives,
// (e) +latent-PGD synthetic positives, (f) +PGD noise negatives.
// Panels share one master seed so data, nets, and attacks line up.
struct FigureConfig {
    std::uint64_t seed = 0;
    std::size_t n_per_class = 500;
    double noise_std = 0.15;
    std::size_t subsample_k = 20;
    std::size_t n_synthetic = 60;
    std::size_t n_noise = 20;
    std::size_t n_pgd_synthetic = 60;
    std::size_t n_pgd_noise = 20;
    std::size_t grid_cells = 200;
    double pad = 1.5; // grid margin beyond the data bounding box
    // Panels train to a fixed budget; early stopping would let the handful
    // of noise negatives go unfit.
    TrainConfig train = default_train();
    SynthTrainConfig synth;
    AttackConfig attack;

    static TrainConfig default_train() {
        TrainConfig t;
        t.epochs = 80;
        t.patience = 0;
        return t;
    }
};

struct PanelData {
    std::string key;  // "a".."f"
    std::string name; // short description
    Classifier model;
    std::vector<LabeledExample> training_set;
    double positive_region_coverage = 0.0; // grid coverage of the positive moon band
    double outside_bbox_positive = 0.0;    // positive-classified fraction outside the data bbox
};

struct FigureResult {
    std::array<PanelData, 6> panels;
    GridSpec grid;
    double data_x_lo = 0, data_x_hi = 0, data_y_lo = 0, data_y_hi = 0; // bbox of the full dataset
    double mean_conf_random_syn = 0.0; // subsampled baseline on random draws
    double mean_conf_pgd_syn = 0.0;    // same baseline on PGD-searched draws (paired z0)
    SynthesizerBundle synthesizer;

    nlohmann::json metrics_json() const;
};

FigureResult run_figure_pipeline(const FigureConfig& cfg);

// Writes fig_<key>_<slug>.svg per panel plus metrics.json; returns the file
// names in panel order followed by the metrics path.
std::vector<std::string> write_figure_outputs(const FigureResult& result, const std::string& out_dir);

} // namespace advaug
