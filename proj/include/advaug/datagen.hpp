#pragma once

#include <string>
#include <vector>

#include "advaug/rng.hpp"
#include "advaug/tensor.hpp"

namespace advaug {

enum class Source : std::uint8_t {
    real,
    synthetic_random,
    synthetic_pgd,
    perturbed,
    noise,
    poisson,
};

const char* source_name(Source s);
Source source_from_name(const std::string& name);

struct LabeledExample {
    Tensor x;      // 2-vector for the toy task, [k,k] patch otherwise
    int label = 0; // 0/1
    Source source = Source::real;
};

void validate_example(const LabeledExample& e); // label/source consistency

// Two interleaving half circles with isotropic Gaussian noise. Points are
// ordered along the arc within each class (positives first), which the
// long-tail subsampler relies on. Exact class balance.
std::vector<LabeledExample> two_moons(std::size_t n_per_class, double noise_std, Rng& rng);

// Noiseless curve geometry of the construction above (t in [0, pi]).
double distance_to_positive_moon(double x, double y);
double distance_to_negative_moon(double x, double y);

// Weighted sample of k positives without replacement, weights decaying
// exponentially (rate over the normalized arc position) so one end of the
// moon dominates. k == size returns the input unchanged.
std::vector<LabeledExample> longtail_subsample(const std::vector<LabeledExample>& positives,
                                               std::size_t k, Rng& rng, double rate = 3.0);

struct BlobSpec {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    double intensity = 0.0;
};

// Smooth low-frequency background with additive Gaussian-profile blobs.
struct PatchScene {
    std::size_t size = 0;
    Tensor background;           // [size,size]
    std::vector<BlobSpec> blobs; // ground-truth centers

    Tensor render() const; // background + blobs, clamped to [0,1]
};

struct BlobSceneConfig {
    std::size_t patch_size = 48;
    std::size_t n_blobs = 2;       // detection targets
    double radius_lo = 2.5;
    double radius_hi = 5.0;
    std::size_t n_small_blobs = 0; // sub-threshold findings (irrelevant for metrics)
    double small_radius_lo = 1.2;
    double small_radius_hi = 2.2;
};

PatchScene blob_scene(const BlobSceneConfig& cfg, Rng& rng);

// x + U(-magnitude, magnitude) per element, clamped to [lo, hi].
Tensor uniform_noise_inject(const Tensor& x, double magnitude, Rng& rng, double lo = 0.0,
                            double hi = 1.0);

// Rescale to [0, scale], draw Poisson per element, rescale back, clamp to
// [0,1]. Inputs must lie in [0,1].
Tensor poisson_noise_inject(const Tensor& x, double scale, Rng& rng);

// Crop a [size,size] window centered at (cx, cy), clamped inside the image.
Tensor crop_window(const Tensor& image, double cx, double cy, std::size_t size);

struct PatchExtractConfig {
    std::size_t patch_size = 16;
    double min_relevant_radius = 2.5; // smaller blobs are not sampled as positives
    int jitter = 2;                   // integer center jitter for positives
    std::size_t negatives_per_scene = 3;
};

// Positive crops centered (with jitter) on relevant blobs; negative crops
// away from every blob.
std::vector<LabeledExample> extract_patches(const std::vector<PatchScene>& scenes,
                                            const PatchExtractConfig& cfg, Rng& rng);

// CSV I/O for 2-D datasets: header x1,x2,label,source.
void save_moons_csv(const std::string& path, const std::vector<LabeledExample>& examples);
std::vector<LabeledExample> load_moons_csv(const std::string& path);

// 3x3 box blur with edge clamping; the candidate-generation stand-in runs
// peak detection on this.
Tensor box_blur3(const Tensor& image);

// Rendered scene + ground truth, as stored in scene files.
struct StoredScene {
    std::string id;
    Tensor image; // [s,s], values in [0,1]
    std::vector<BlobSpec> blobs;
};

void save_scenes_json(const std::string& path, const std::vector<StoredScene>& scenes);
std::vector<StoredScene> load_scenes_json(const std::string& path);

} // namespace advaug
