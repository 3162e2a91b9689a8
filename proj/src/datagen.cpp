#include "advaug/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "advaug/errors.hpp"

namespace advaug {

const char* source_name(Source s) {
    switch (s) {
        case Source::real: return "real";
        case Source::synthetic_random: return "synthetic-random";
        case Source::synthetic_pgd: return "synthetic-pgd";
        case Source::perturbed: return "perturbed";
        case Source::noise: return "noise";
        case Source::poisson: return "poisson";
    }
    return "real";
}

Source source_from_name(const std::string& name) {
    if (name == "real") return Source::real;
    if (name == "synthetic-random") return Source::synthetic_random;
    if (name == "synthetic-pgd") return Source::synthetic_pgd;
    if (name == "perturbed") return Source::perturbed;
    if (name == "noise") return Source::noise;
    if (name == "poisson") return Source::poisson;
    throw ConfigError("unknown example source: " + name);
}

void validate_example(const LabeledExample& e) {
    if (e.label != 0 && e.label != 1) throw ConfigError("example label must be 0 or 1");
    if (e.source == Source::noise && e.label != 0) {
        throw ConfigError("noise examples must carry label 0");
    }
    if ((e.source == Source::synthetic_random || e.source == Source::synthetic_pgd) && e.label != 1) {
        throw ConfigError("synthetic examples must carry label 1");
    }
}

namespace {
constexpr double kPi = std::numbers::pi;

// positive moon: (cos t, sin t); negative moon: (1 - cos t, 0.5 - sin t)
double curve_param(std::size_t i, std::size_t n) {
    return n <= 1 ? 0.0 : kPi * static_cast<double>(i) / static_cast<double>(n - 1);
}

} // namespace

double distance_to_positive_moon(double x, double y) {
    double r = std::hypot(x, y);
    if (y >= 0.0) return std::abs(r - 1.0);
    return std::sqrt(std::min((x - 1.0) * (x - 1.0), (x + 1.0) * (x + 1.0)) + y * y);
}

double distance_to_negative_moon(double x, double y) {
    // mirror into the positive frame
    double mx = 1.0 - x;
    double my = 0.5 - y;
    return distance_to_positive_moon(mx, my);
}

std::vector<LabeledExample> two_moons(std::size_t n_per_class, double noise_std, Rng& rng) {
    if (n_per_class < 1) throw ConfigError("two_moons: need at least one point per class");
    if (noise_std < 0.0) throw ConfigError("two_moons: noise std must be >= 0");
    std::vector<LabeledExample> out;
    out.reserve(2 * n_per_class);
    for (std::size_t i = 0; i < n_per_class; ++i) {
        double t = curve_param(i, n_per_class);
        double x = std::cos(t) + rng.normal(0.0, noise_std);
        double y = std::sin(t) + rng.normal(0.0, noise_std);
        out.push_back({Tensor::vector({x, y}), 1, Source::real});
    }
    for (std::size_t i = 0; i < n_per_class; ++i) {
        double t = curve_param(i, n_per_class);
        double x = 1.0 - std::cos(t) + rng.normal(0.0, noise_std);
        double y = 0.5 - std::sin(t) + rng.normal(0.0, noise_std);
        out.push_back({Tensor::vector({x, y}), 0, Source::real});
    }
    return out;
}

std::vector<LabeledExample> longtail_subsample(const std::vector<LabeledExample>& positives,
                                               std::size_t k, Rng& rng, double rate) {
    if (k > positives.size()) {
        throw ConfigError("longtail_subsample: k exceeds the number of positives");
    }
    if (k == positives.size()) return positives;

    // Weighted reservoir keys (Efraimidis-Spirakis): keep the k largest
    // u^(1/w); weights decay along the arc order.
    std::size_t n = positives.size();
    std::vector<std::pair<double, std::size_t>> keys(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = n <= 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
        double w = std::exp(-rate * s);
        double u = rng.uniform_pos();
        keys[i] = {std::pow(u, 1.0 / w), i};
    }
    std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    for (std::size_t i = 0; i < k; ++i) chosen.push_back(keys[i].second);
    std::sort(chosen.begin(), chosen.end());
    std::vector<LabeledExample> out;
    out.reserve(k);
    for (std::size_t idx : chosen) out.push_back(positives[idx]);
    return out;
}

Tensor PatchScene::render() const {
    std::size_t s = size;
    Tensor img = background;
    for (const auto& blob : blobs) {
        double sigma = blob.radius / 2.0;
        double two_s2 = 2.0 * sigma * sigma;
        for (std::size_t r = 0; r < s; ++r) {
            for (std::size_t c = 0; c < s; ++c) {
                double dx = static_cast<double>(c) - blob.cx;
                double dy = static_cast<double>(r) - blob.cy;
                img[r * s + c] += blob.intensity * std::exp(-(dx * dx + dy * dy) / two_s2);
            }
        }
    }
    return vclamp(img, 0.0, 1.0);
}

PatchScene blob_scene(const BlobSceneConfig& cfg, Rng& rng) {
    std::size_t s = cfg.patch_size;
    if (s < 8) throw ConfigError("blob_scene: patch size too small");
    if (cfg.radius_hi < cfg.radius_lo || cfg.radius_lo <= 0.0) {
        throw ConfigError("blob_scene: bad radius range");
    }
    if (cfg.radius_hi + 2.0 > static_cast<double>(s) / 2.0) {
        throw ConfigError("blob_scene: radii do not fit inside the patch");
    }

    PatchScene scene;
    scene.size = s;

    // low-frequency background
    struct Mode {
        double amp, fx, fy, phase;
    };
    std::vector<Mode> modes;
    for (int m = 0; m < 3; ++m) {
        modes.push_back({rng.uniform(0.03, 0.09), rng.uniform(0.5, 1.5) / static_cast<double>(s),
                         rng.uniform(0.5, 1.5) / static_cast<double>(s),
                         rng.uniform(0.0, 2.0 * std::numbers::pi)});
    }
    std::vector<double> bg(s * s);
    for (std::size_t r = 0; r < s; ++r) {
        for (std::size_t c = 0; c < s; ++c) {
            double v = 0.35;
            for (const auto& mode : modes) {
                v += mode.amp * std::cos(2.0 * std::numbers::pi *
                                             (mode.fx * static_cast<double>(c) +
                                              mode.fy * static_cast<double>(r)) +
                                         mode.phase);
            }
            v += rng.uniform(-0.01, 0.01);
            bg[r * s + c] = std::clamp(v, 0.0, 0.8);
        }
    }
    scene.background = Tensor::from({s, s}, std::move(bg));

    auto place = [&](double radius, double intensity) {
        double margin = radius + 2.0;
        for (int tries = 0; tries < 64; ++tries) {
            double cx = rng.uniform(margin, static_cast<double>(s) - margin);
            double cy = rng.uniform(margin, static_cast<double>(s) - margin);
            bool ok = true;
            for (const auto& other : scene.blobs) {
                double d = std::hypot(cx - other.cx, cy - other.cy);
                if (d < radius + other.radius + 2.0) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                scene.blobs.push_back({cx, cy, radius, intensity});
                return;
            }
        }
        // crowded scene: skip this blob rather than overlap ground truths
    };

    for (std::size_t i = 0; i < cfg.n_blobs; ++i) {
        place(rng.uniform(cfg.radius_lo, cfg.radius_hi), rng.uniform(0.35, 0.6));
    }
    for (std::size_t i = 0; i < cfg.n_small_blobs; ++i) {
        place(rng.uniform(cfg.small_radius_lo, cfg.small_radius_hi), rng.uniform(0.2, 0.35));
    }
    return scene;
}

Tensor uniform_noise_inject(const Tensor& x, double magnitude, Rng& rng, double lo, double hi) {
    if (magnitude < 0.0) throw ConfigError("uniform_noise_inject: magnitude must be >= 0");
    if (magnitude == 0.0) return x;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::clamp(x[i] + rng.uniform(-magnitude, magnitude), lo, hi);
    }
    return Tensor::from(x.shape(), std::move(out));
}

Tensor poisson_noise_inject(const Tensor& x, double scale, Rng& rng) {
    if (!(scale > 0.0)) throw ConfigError("poisson_noise_inject: scale must be > 0");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < 0.0 || x[i] > 1.0) {
            throw ConfigError("poisson_noise_inject: values must lie in [0,1], found " +
                              std::to_string(x[i]));
        }
        double lambda = x[i] * scale;
        out[i] = std::clamp(static_cast<double>(rng.poisson(lambda)) / scale, 0.0, 1.0);
    }
    return Tensor::from(x.shape(), std::move(out));
}

Tensor crop_window(const Tensor& image, double cx, double cy, std::size_t size) {
    std::size_t h = image.rows(), w = image.cols();
    if (size > h || size > w) throw std::invalid_argument("crop_window: window exceeds the image");
    auto clamp_origin = [&](double center, std::size_t extent) {
        long o = std::lround(center) - static_cast<long>(size) / 2;
        o = std::max(0l, std::min(o, static_cast<long>(extent - size)));
        return static_cast<std::size_t>(o);
    };
    std::size_t ox = clamp_origin(cx, w), oy = clamp_origin(cy, h);
    std::vector<double> out(size * size);
    for (std::size_t r = 0; r < size; ++r) {
        for (std::size_t c = 0; c < size; ++c) {
            out[r * size + c] = image[(oy + r) * w + (ox + c)];
        }
    }
    return Tensor::from({size, size}, std::move(out));
}

std::vector<LabeledExample> extract_patches(const std::vector<PatchScene>& scenes,
                                            const PatchExtractConfig& cfg, Rng& rng) {
    std::vector<LabeledExample> out;
    for (const auto& scene : scenes) {
        Tensor img = scene.render();
        for (const auto& blob : scene.blobs) {
            if (blob.radius < cfg.min_relevant_radius) continue;
            double jx = cfg.jitter > 0 ? static_cast<double>(static_cast<long>(
                                             rng.below(2 * cfg.jitter + 1)) - cfg.jitter)
                                       : 0.0;
            double jy = cfg.jitter > 0 ? static_cast<double>(static_cast<long>(
                                             rng.below(2 * cfg.jitter + 1)) - cfg.jitter)
                                       : 0.0;
            out.push_back({crop_window(img, blob.cx + jx, blob.cy + jy, cfg.patch_size), 1,
                           Source::real});
        }
        std::size_t placed = 0;
        for (int tries = 0; tries < 200 && placed < cfg.negatives_per_scene; ++tries) {
            double cx = rng.uniform(0.0, static_cast<double>(scene.size - 1));
            double cy = rng.uniform(0.0, static_cast<double>(scene.size - 1));
            bool clear = true;
            for (const auto& blob : scene.blobs) {
                if (std::hypot(cx - blob.cx, cy - blob.cy) <
                    blob.radius + static_cast<double>(cfg.patch_size) / 4.0) {
                    clear = false;
                    break;
                }
            }
            if (!clear) continue;
            out.push_back({crop_window(img, cx, cy, cfg.patch_size), 0, Source::real});
            ++placed;
        }
    }
    return out;
}

void save_moons_csv(const std::string& path, const std::vector<LabeledExample>& examples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "x1,x2,label,source\n";
    char buf[64];
    for (const auto& e : examples) {
        if (e.x.size() != 2) throw std::invalid_argument("save_moons_csv: examples must be 2-D");
        std::snprintf(buf, sizeof buf, "%.17g", e.x[0]);
        out << buf << ",";
        std::snprintf(buf, sizeof buf, "%.17g", e.x[1]);
        out << buf << "," << e.label << "," << source_name(e.source) << "\n";
    }
    if (!out.good()) throw IoError("write failed: " + path);
}

Tensor box_blur3(const Tensor& image) {
    std::size_t h = image.rows(), w = image.cols();
    std::vector<double> out(h * w);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    std::size_t rr = static_cast<std::size_t>(
                        std::clamp<long>(static_cast<long>(r) + dr, 0, static_cast<long>(h) - 1));
                    std::size_t cc = static_cast<std::size_t>(
                        std::clamp<long>(static_cast<long>(c) + dc, 0, static_cast<long>(w) - 1));
                    acc += image[rr * w + cc];
                }
            }
            out[r * w + c] = acc / 9.0;
        }
    }
    return Tensor::from({h, w}, std::move(out));
}

void save_scenes_json(const std::string& path, const std::vector<StoredScene>& scenes) {
    nlohmann::json j;
    j["format"] = "advaug-scenes";
    j["version"] = 1;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : scenes) {
        nlohmann::json blobs = nlohmann::json::array();
        for (const auto& b : s.blobs) {
            blobs.push_back({{"cx", b.cx}, {"cy", b.cy}, {"radius", b.radius}, {"intensity", b.intensity}});
        }
        arr.push_back({{"id", s.id},
                       {"size", s.image.rows()},
                       {"image", std::vector<double>(s.image.data().begin(), s.image.data().end())},
                       {"blobs", std::move(blobs)}});
    }
    j["scenes"] = std::move(arr);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump() << "\n";
    if (!out.good()) throw IoError("write failed: " + path);
}

std::vector<StoredScene> load_scenes_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed JSON in " + path + ": " + e.what());
    }
    std::vector<StoredScene> scenes;
    try {
        if (j.at("format").get<std::string>() != "advaug-scenes") {
            throw ConfigError(path + ": not an advaug scene file");
        }
        for (const auto& s : j.at("scenes")) {
            StoredScene scene;
            scene.id = s.at("id").get<std::string>();
            std::size_t size = s.at("size").get<std::size_t>();
            scene.image = Tensor::from({size, size}, s.at("image").get<std::vector<double>>());
            for (const auto& b : s.at("blobs")) {
                scene.blobs.push_back({b.at("cx").get<double>(), b.at("cy").get<double>(),
                                       b.at("radius").get<double>(), b.at("intensity").get<double>()});
            }
            scenes.push_back(std::move(scene));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": bad scene structure: " + e.what());
    }
    return scenes;
}

std::vector<LabeledExample> load_moons_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty dataset");
    if (line != "x1,x2,label,source") throw ConfigError(path + ": unexpected CSV header: " + line);
    std::vector<LabeledExample> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f1, f2, f3, f4;
        if (!std::getline(ss, f1, ',') || !std::getline(ss, f2, ',') || !std::getline(ss, f3, ',') ||
            !std::getline(ss, f4)) {
            throw ConfigError(path + ": malformed row at line " + std::to_string(lineno));
        }
        LabeledExample e;
        try {
            e.x = Tensor::vector({std::stod(f1), std::stod(f2)});
            e.label = std::stoi(f3);
        } catch (const std::exception&) {
            throw ConfigError(path + ": malformed number at line " + std::to_string(lineno));
        }
        e.source = source_from_name(f4);
        validate_example(e);
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace advaug
