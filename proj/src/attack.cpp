#include "advaug/attack.hpp"

#include <cmath>
#include <stdexcept>

#include "advaug/errors.hpp"
#include "advaug/losses.hpp"

namespace advaug {

const char* attack_norm_name(AttackNorm n) { return n == AttackNorm::linf ? "linf" : "l2"; }

AttackNorm attack_norm_from_name(const std::string& name) {
    if (name == "linf" || name == "l-inf" || name == "inf") return AttackNorm::linf;
    if (name == "l2") return AttackNorm::l2;
    throw ConfigError("unknown attack norm: " + name);
}

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw ConfigError("attack: epsilon must be >= 0");
    if (!(alpha > 0.0)) throw ConfigError("attack: alpha must be > 0");
    if (iterations < 1) throw ConfigError("attack: iterations must be >= 1");
    if (target_label != 0 && target_label != 1) throw ConfigError("attack: target label must be 0 or 1");
}

Tensor project(const Tensor& delta, double epsilon, AttackNorm norm) {
    if (epsilon < 0.0) throw ConfigError("project: epsilon must be >= 0");
    if (norm == AttackNorm::linf) {
        return vclamp(delta, -epsilon, epsilon);
    }
    double n = l2_norm(delta);
    // the relative slack keeps the projection bitwise idempotent: a rescaled
    // vector may land a few ulps above epsilon and must not rescale again
    if (n <= epsilon * (1.0 + 1e-12)) return delta;
    return delta * (epsilon / n);
}

namespace {

double norm_of(const Tensor& delta, AttackNorm norm) {
    return norm == AttackNorm::linf ? linf_norm(delta) : l2_norm(delta);
}

Tensor initial_delta(const Shape& shape, const AttackConfig& cfg, Rng& rng) {
    if (cfg.init == AttackInit::zero || cfg.epsilon == 0.0) return Tensor::zeros(shape);
    std::vector<double> d(shape_numel(shape));
    for (auto& v : d) v = rng.uniform(-cfg.epsilon, cfg.epsilon);
    return project(Tensor::from(shape, std::move(d)), cfg.epsilon, cfg.norm);
}

} // namespace

PgdTrace pgd_maximize(const AttackLossFn& loss, const Shape& delta_shape, const AttackConfig& cfg,
                      Rng& rng, const std::function<Tensor(const Tensor&)>& post_project) {
    cfg.validate();
    Tensor delta = initial_delta(delta_shape, cfg, rng);
    if (post_project) delta = post_project(delta);

    PgdTrace trace;
    trace.loss_trajectory.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
    for (int it = 0; it < cfg.iterations; ++it) {
        Tape tape;
        Var dv = tape.leaf(delta, true);
        Var l = loss(tape, dv);
        double lv = tape.value(l).item();
        if (!std::isfinite(lv)) {
            throw NumericalError("pgd: non-finite loss at iteration " + std::to_string(it));
        }
        trace.loss_trajectory.push_back(lv);
        trace.norm_trajectory.push_back(norm_of(delta, cfg.norm));
        tape.backward(l);
        Tensor grad = tape.grad(dv);
        if (!grad.all_finite()) {
            throw NumericalError("pgd: non-finite gradient at iteration " + std::to_string(it));
        }
        delta = project(delta + grad * cfg.alpha, cfg.epsilon, cfg.norm);
        if (post_project) delta = post_project(delta);
    }
    {
        Tape tape;
        Var dv = tape.leaf(delta, false);
        double lv = tape.value(loss(tape, dv)).item();
        if (!std::isfinite(lv)) {
            throw NumericalError("pgd: non-finite loss after final step");
        }
        trace.loss_trajectory.push_back(lv);
        trace.norm_trajectory.push_back(norm_of(delta, cfg.norm));
    }
    trace.delta = std::move(delta);
    return trace;
}

Tensor threshold_mask(const Tensor& x, double threshold) {
    std::vector<double> m(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) m[i] = x[i] > threshold ? 1.0 : 0.0;
    return Tensor::from(x.shape(), std::move(m));
}

Var fuse(Var x_tilde, const Tensor& x, const Tensor& mask) {
    Tape& t = *x_tilde.tape;
    check_same_shape(t.value(x_tilde), x, "fuse");
    check_same_shape(x, mask, "fuse");
    Var m = t.constant(mask);
    Var xc = t.constant(x);
    return x_tilde * m + xc * (1.0 - m);
}

Tensor fuse_value(const Tensor& x_tilde, const Tensor& x, const Tensor& mask) {
    check_same_shape(x_tilde, x, "fuse");
    check_same_shape(x, mask, "fuse");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x_tilde[i] * mask[i] + x[i] * (1.0 - mask[i]);
    }
    return Tensor::from(x.shape(), std::move(out));
}

Var frozen_classifier_loss(Tape& t, const Classifier& model, Var input, double label) {
    const Tensor& xv = t.value(input);
    Var batch = xv.rank() == 1 ? reshape(input, {1, xv.size()}) : input;
    Var logits = model.net.forward_frozen(t, batch);
    Var losses = classification_loss_vec(t, model.head, logits, {label}, /*anneal=*/0.0);
    return sum(losses);
}

namespace {

bool attack_success(double before, double after, int target_label, double threshold) {
    // Maximizing the loss toward the true label drives the response across
    // the decision line: positives fall below it, negatives rise above it.
    (void)before;
    return target_label == 1 ? after < threshold : after > threshold;
}

} // namespace

AttackResult attack_latent(const SynthesizerBundle& synth, const Classifier& model, const Tensor& z0,
                           const FusionSpec& fusion, const AttackConfig& cfg, Rng& rng) {
    if (z0.size() != synth.latent_dim) {
        throw std::invalid_argument("attack_latent: z0 has " + std::to_string(z0.size()) +
                                    " dims, generator expects " + std::to_string(synth.latent_dim));
    }
    auto sample_of = [&](Tape& t, Var delta) -> Var {
        Var z = t.constant(z0) + delta;
        Var x_tilde = synth.generator.forward_frozen(t, z);
        if (!fusion.enabled) return x_tilde;
        // The mask tracks the current synthetic sample but stays detached.
        Tensor mask = threshold_mask(t.value(x_tilde), fusion.threshold);
        return fuse(x_tilde, fusion.background, mask);
    };
    auto loss = [&](Tape& t, Var delta) {
        return frozen_classifier_loss(t, model, sample_of(t, delta), 1.0);
    };

    PgdTrace trace = pgd_maximize(loss, z0.shape(), cfg, rng);

    AttackResult result;
    result.delta = trace.delta;
    result.loss_trajectory = std::move(trace.loss_trajectory);
    result.norm_trajectory = std::move(trace.norm_trajectory);
    {
        Tape t;
        Var s0 = sample_of(t, t.constant(Tensor::zeros(z0.shape())));
        result.response_before = model.confidence(t.value(s0));
        Var s1 = sample_of(t, t.constant(trace.delta));
        result.sample = t.value(s1);
        result.response_after = model.confidence(result.sample);
        result.latent = z0 + trace.delta;
    }
    result.success = attack_success(result.response_before, result.response_after, 1,
                                    cfg.success_threshold);
    return result;
}

AttackResult attack_patch(const Classifier& model, const Tensor& x, int label,
                          const AttackConfig& cfg, Rng& rng) {
    if (label != 0 && label != 1) throw std::invalid_argument("attack_patch: label must be 0 or 1");
    auto loss = [&](Tape& t, Var delta) {
        Var input = t.constant(x) + delta;
        return frozen_classifier_loss(t, model, input, static_cast<double>(label));
    };
    PgdTrace trace = pgd_maximize(loss, x.shape(), cfg, rng);

    AttackResult result;
    result.delta = trace.delta;
    result.loss_trajectory = std::move(trace.loss_trajectory);
    result.norm_trajectory = std::move(trace.norm_trajectory);
    result.sample = x + trace.delta;
    result.response_before = model.confidence(x);
    result.response_after = model.confidence(result.sample);
    result.success = attack_success(result.response_before, result.response_after, label,
                                    cfg.success_threshold);
    return result;
}

AttackResult attack_from_noise(const Classifier& model, const Shape& shape, const Tensor& range_lo,
                               const Tensor& range_hi, const AttackConfig& cfg, Rng& rng) {
    if (shape_numel(shape) != range_lo.size() || shape_numel(shape) != range_hi.size()) {
        throw std::invalid_argument("attack_from_noise: range extents do not match the patch shape");
    }
    std::vector<double> x0(shape_numel(shape));
    for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = rng.uniform(range_lo[i], range_hi[i]);
    Tensor base = Tensor::from(shape, std::move(x0));

    // Keep x0 + delta inside the value range; clamping never grows |delta_i|,
    // so the ball bound survives.
    auto post = [&](const Tensor& delta) { return vclamp(base + delta, range_lo, range_hi) - base; };
    auto loss = [&](Tape& t, Var delta) {
        Var input = t.constant(base) + delta;
        return frozen_classifier_loss(t, model, input, 0.0);
    };
    PgdTrace trace = pgd_maximize(loss, shape, cfg, rng, post);

    AttackResult result;
    result.delta = trace.delta;
    result.loss_trajectory = std::move(trace.loss_trajectory);
    result.norm_trajectory = std::move(trace.norm_trajectory);
    result.sample = base + trace.delta;
    result.response_before = model.confidence(base);
    result.response_after = model.confidence(result.sample);
    result.success = attack_success(result.response_before, result.response_after, 0,
                                    cfg.success_threshold);
    return result;
}

} // namespace advaug
