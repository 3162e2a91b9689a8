#include "advaug/figures.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "advaug/errors.hpp"

namespace advaug {

namespace {

Classifier train_panel_model(const std::vector<LabeledExample>& data, const FigureConfig& cfg,
                             const std::string& stream) {
    Rng rng = Rng(cfg.seed).child("model-" + stream);
    Classifier model = Classifier::make({32, 16}, 2, HeadKind::cross_entropy, rng);
    TrainConfig tc = cfg.train;
    tc.seed = Rng(cfg.seed).child("train-" + stream).seed();
    train_baseline(model, data, tc);
    return model;
}

double coverage_of(const Classifier& model, const Tensor& region_points) {
    if (region_points.rows() == 0) return 0.0;
    std::vector<double> conf = model.confidences(region_points);
    std::size_t hit = 0;
    for (double c : conf) hit += c > 0.5 ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(conf.size());
}

} // namespace

nlohmann::json FigureResult::metrics_json() const {
    nlohmann::json panels_json = nlohmann::json::object();
    for (const auto& p : panels) {
        panels_json[p.key] = {
            {"name", p.name},
            {"positive_region_coverage", p.positive_region_coverage},
            {"outside_bbox_positive", p.outside_bbox_positive},
            {"training_points", p.training_set.size()},
        };
    }
    return nlohmann::json{
        {"panels", std::move(panels_json)},
        {"mean_conf_random_syn", mean_conf_random_syn},
        {"mean_conf_pgd_syn", mean_conf_pgd_syn},
        {"data_bbox", {data_x_lo, data_x_hi, data_y_lo, data_y_hi}},
    };
}

FigureResult run_figure_pipeline(const FigureConfig& cfg) {
    Rng master(cfg.seed);
    FigureResult out;

    // shared data
    Rng data_rng = master.child("data");
    std::vector<LabeledExample> full = two_moons(cfg.n_per_class, cfg.noise_std, data_rng);
    std::vector<LabeledExample> positives(full.begin(),
                                          full.begin() + static_cast<long>(cfg.n_per_class));
    std::vector<LabeledExample> negatives(full.begin() + static_cast<long>(cfg.n_per_class),
                                          full.end());
    Rng sub_rng = master.child("subsample");
    std::vector<LabeledExample> sub_pos = longtail_subsample(positives, cfg.subsample_k, sub_rng);

    out.data_x_lo = out.data_x_hi = full.front().x[0];
    out.data_y_lo = out.data_y_hi = full.front().x[1];
    for (const auto& e : full) {
        out.data_x_lo = std::min(out.data_x_lo, e.x[0]);
        out.data_x_hi = std::max(out.data_x_hi, e.x[0]);
        out.data_y_lo = std::min(out.data_y_lo, e.x[1]);
        out.data_y_hi = std::max(out.data_y_hi, e.x[1]);
    }
    out.grid.x_lo = out.data_x_lo - cfg.pad;
    out.grid.x_hi = out.data_x_hi + cfg.pad;
    out.grid.y_lo = out.data_y_lo - cfg.pad;
    out.grid.y_hi = out.data_y_hi + cfg.pad;
    out.grid.nx = cfg.grid_cells;
    out.grid.ny = cfg.grid_cells;

    // synthesizer on the subsampled positives (the data-starved regime)
    Rng synth_rng = master.child("synth-init");
    out.synthesizer = SynthesizerBundle::make(2, 2, 16, Activation::identity, synth_rng);
    SynthTrainConfig sc = cfg.synth;
    sc.seed = master.child("synth-train").seed();
    train_synthesizer(out.synthesizer, stack_features(sub_pos), sc);

    // panel datasets build on each other
    std::vector<LabeledExample> set_b = sub_pos;
    set_b.insert(set_b.end(), negatives.begin(), negatives.end());

    Rng syn_rng = master.child("syn-draws");
    std::vector<LabeledExample> random_syn;
    for (std::size_t i = 0; i < cfg.n_synthetic; ++i) {
        Tensor z = standard_normal({out.synthesizer.latent_dim}, syn_rng);
        random_syn.push_back({generate(out.synthesizer, z), 1, Source::synthetic_random});
    }
    std::vector<LabeledExample> set_c = set_b;
    set_c.insert(set_c.end(), random_syn.begin(), random_syn.end());

    Rng noise_rng = master.child("noise-draws");
    std::vector<LabeledExample> uniform_noise;
    for (std::size_t i = 0; i < cfg.n_noise; ++i) {
        uniform_noise.push_back({Tensor::vector({noise_rng.uniform(out.grid.x_lo, out.grid.x_hi),
                                                 noise_rng.uniform(out.grid.y_lo, out.grid.y_hi)}),
                                 0, Source::noise});
    }
    std::vector<LabeledExample> set_d = set_c;
    set_d.insert(set_d.end(), uniform_noise.begin(), uniform_noise.end());

    // models a..d
    Classifier model_a = train_panel_model(full, cfg, "a");
    Classifier model_b = train_panel_model(set_b, cfg, "b");
    Classifier model_c = train_panel_model(set_c, cfg, "c");
    Classifier model_d = train_panel_model(set_d, cfg, "d");

    // PGD-searched synthetic positives against the data-starved baseline,
    // paired with the unattacked draws for the confidence comparison
    Rng pgd_syn_rng = master.child("pgd-syn");
    std::vector<LabeledExample> pgd_syn;
    double conf_random = 0.0, conf_pgd = 0.0;
    for (std::size_t i = 0; i < cfg.n_pgd_synthetic; ++i) {
        Tensor z0 = standard_normal({out.synthesizer.latent_dim}, pgd_syn_rng);
        Rng worker = pgd_syn_rng.child(i);
        AttackResult r = attack_latent(out.synthesizer, model_b, z0, {}, cfg.attack, worker);
        pgd_syn.push_back({r.sample, 1, Source::synthetic_pgd});
        conf_random += r.response_before;
        conf_pgd += r.response_after;
    }
    out.mean_conf_random_syn = conf_random / static_cast<double>(cfg.n_pgd_synthetic);
    out.mean_conf_pgd_syn = conf_pgd / static_cast<double>(cfg.n_pgd_synthetic);

    std::vector<LabeledExample> set_e = set_d;
    set_e.insert(set_e.end(), pgd_syn.begin(), pgd_syn.end());
    Classifier model_e = train_panel_model(set_e, cfg, "e");

    // PGD noise negatives against the same baseline
    Rng pgd_noise_rng = master.child("pgd-noise");
    Tensor lo = Tensor::vector({out.grid.x_lo, out.grid.y_lo});
    Tensor hi = Tensor::vector({out.grid.x_hi, out.grid.y_hi});
    std::vector<LabeledExample> pgd_noise;
    for (std::size_t i = 0; i < cfg.n_pgd_noise; ++i) {
        Rng worker = pgd_noise_rng.child(i);
        AttackResult r = attack_from_noise(model_b, {2}, lo, hi, cfg.attack, worker);
        pgd_noise.push_back({r.sample, 0, Source::noise});
    }
    std::vector<LabeledExample> set_f = set_e;
    set_f.insert(set_f.end(), pgd_noise.begin(), pgd_noise.end());
    Classifier model_f = train_panel_model(set_f, cfg, "f");

    // shared measurement grids
    std::vector<double> region_pts;
    std::vector<double> outside_pts;
    for (std::size_t j = 0; j < out.grid.ny; ++j) {
        for (std::size_t i = 0; i < out.grid.nx; ++i) {
            double x = out.grid.cell_x(i), y = out.grid.cell_y(j);
            if (distance_to_positive_moon(x, y) <= 2.0 * cfg.noise_std) {
                region_pts.push_back(x);
                region_pts.push_back(y);
            }
            if (x < out.data_x_lo || x > out.data_x_hi || y < out.data_y_lo || y > out.data_y_hi) {
                outside_pts.push_back(x);
                outside_pts.push_back(y);
            }
        }
    }
    const std::size_t n_region = region_pts.size() / 2;
    const std::size_t n_outside = outside_pts.size() / 2;
    Tensor region = Tensor::from({n_region, 2}, std::move(region_pts));
    Tensor outside = Tensor::from({n_outside, 2}, std::move(outside_pts));

    auto fill_panel = [&](std::size_t idx, const char* key, const char* name, Classifier model,
                          std::vector<LabeledExample> set) {
        PanelData& p = out.panels[idx];
        p.key = key;
        p.name = name;
        p.positive_region_coverage = coverage_of(model, region);
        p.outside_bbox_positive = coverage_of(model, outside);
        p.model = std::move(model);
        p.training_set = std::move(set);
    };
    fill_panel(0, "a", "full data", std::move(model_a), full);
    fill_panel(1, "b", "long-tail subsample", std::move(model_b), set_b);
    fill_panel(2, "c", "plus random synthetic", std::move(model_c), set_c);
    fill_panel(3, "d", "plus uniform noise", std::move(model_d), set_d);
    fill_panel(4, "e", "plus PGD synthetic", std::move(model_e), set_e);
    fill_panel(5, "f", "plus PGD noise", std::move(model_f), set_f);
    return out;
}

std::vector<std::string> write_figure_outputs(const FigureResult& result, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create directory: " + out_dir);

    std::vector<std::string> written;
    for (const auto& p : result.panels) {
        std::string slug = p.name;
        std::replace(slug.begin(), slug.end(), ' ', '-');
        std::string path = (fs::path(out_dir) / ("fig_" + p.key + "_" + slug + ".svg")).string();
        write_boundary_svg(path, p.model, result.grid, p.training_set);
        written.push_back(path);
    }
    std::string metrics_path = (fs::path(out_dir) / "metrics.json").string();
    std::ofstream out(metrics_path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + metrics_path);
    out << result.metrics_json().dump(2) << "\n";
    if (!out.good()) throw IoError("write failed: " + metrics_path);
    written.push_back(metrics_path);
    return written;
}

} // namespace advaug
