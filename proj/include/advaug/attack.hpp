#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "advaug/heads.hpp"
#include "advaug/rng.hpp"
#include "advaug/synthesizer.hpp"
#include "advaug/tape.hpp"

namespace advaug {

enum class AttackNorm : std::uint8_t { linf, l2 };
enum class AttackInit : std::uint8_t { zero, random_in_ball };

const char* attack_norm_name(AttackNorm n);
AttackNorm attack_norm_from_name(const std::string& name);

struct AttackConfig {
    double epsilon = 0.15;
    double alpha = 0.05;
    int iterations = 20;
    AttackNorm norm = AttackNorm::linf;
    AttackInit init = AttackInit::zero;
    int target_label = 1;
    double success_threshold = 0.5;

    void validate() const; // epsilon >= 0, alpha > 0, iterations >= 1
};

struct AttackResult {
    Tensor delta;
    Tensor sample;                     // final model input (fused/perturbed/clamped)
    std::vector<double> loss_trajectory; // loss at delta_0 .. delta_T
    std::vector<double> norm_trajectory; // ||delta_k|| per recorded iterate
    double response_before = 0.0;      // confidence at delta = 0
    double response_after = 0.0;
    bool success = false;              // crossed the 0.5 line in the attack direction
    std::optional<Tensor> latent;      // z0 + delta for latent attacks
};

// Projection onto the epsilon ball: componentwise clamp for l-inf, rescale
// iff the norm exceeds epsilon for l2. Idempotent.
Tensor project(const Tensor& delta, double epsilon, AttackNorm norm);

// Loss to MAXIMIZE, built on the given tape from the current delta.
using AttackLossFn = std::function<Var(Tape&, Var delta)>;

struct PgdTrace {
    Tensor delta;
    std::vector<double> loss_trajectory;
    std::vector<double> norm_trajectory;
};

// Plain-gradient PGD ascent: delta <- P(delta + alpha * grad), projected
// after every step including the last. Deterministic given rng.
// `post_project` (optional) is applied after the ball projection each step;
// pure-noise attacks use it to keep x0+delta inside the value range.
PgdTrace pgd_maximize(const AttackLossFn& loss, const Shape& delta_shape, const AttackConfig& cfg,
                      Rng& rng,
                      const std::function<Tensor(const Tensor&)>& post_project = nullptr);

// m = 1 where x exceeds the threshold; detached from gradient flow.
Tensor threshold_mask(const Tensor& x, double threshold);

// x_tilde * m + x * (1 - m); differentiable w.r.t. x_tilde.
Var fuse(Var x_tilde, const Tensor& x, const Tensor& mask);
Tensor fuse_value(const Tensor& x_tilde, const Tensor& x, const Tensor& mask);

// Attack loss against a frozen classifier: the head's data-term loss toward
// `label`, maximized by PGD.
Var frozen_classifier_loss(Tape& t, const Classifier& model, Var input, double label);

struct FusionSpec {
    bool enabled = false;
    double threshold = 0.5; // midpoint of the generator's output range
    Tensor background;      // same shape as the generator output
};

// PGD over the latent code: maximizes loss(classifier(G(z0+delta) [fused]), 1).
AttackResult attack_latent(const SynthesizerBundle& synth, const Classifier& model, const Tensor& z0,
                           const FusionSpec& fusion, const AttackConfig& cfg, Rng& rng);

// PGD over the input patch toward its own label g (positives become misses,
// negatives become false positives).
AttackResult attack_patch(const Classifier& model, const Tensor& x, int label,
                          const AttackConfig& cfg, Rng& rng);

// PGD from pure noise toward a positive decision; the iterate is clamped to
// [range_lo, range_hi] after each step.
AttackResult attack_from_noise(const Classifier& model, const Shape& shape, const Tensor& range_lo,
                               const Tensor& range_hi, const AttackConfig& cfg, Rng& rng);

} // namespace advaug
