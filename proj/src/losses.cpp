#include "advaug/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "advaug/errors.hpp"

namespace advaug {

namespace {
constexpr double kProbClamp = 1e-7;
} // namespace

Var loss_cross_entropy(Var p, double g) {
    if (g != 0.0 && g != 1.0) throw std::invalid_argument("cross-entropy label must be 0 or 1");
    Var pc = clamp(p, kProbClamp, 1.0 - kProbClamp);
    return neg(log(pc) * g + log(1.0 - pc) * (1.0 - g));
}

Var loss_cross_entropy_vec(Var p, const std::vector<double>& labels) {
    Tape& t = *p.tape;
    const Tensor& pv = t.value(p);
    if (pv.size() != labels.size()) {
        throw std::invalid_argument("cross-entropy: " + std::to_string(pv.size()) + " probabilities vs " +
                                    std::to_string(labels.size()) + " labels");
    }
    Var g = t.constant(Tensor::vector(std::vector<double>(labels)));
    Var pc = clamp(p, kProbClamp, 1.0 - kProbClamp);
    return neg(g * log(pc) + (1.0 - g) * log(1.0 - pc));
}

namespace {

// KL(Beta(a,b) || Beta(1,1)) with a,b already on tape.
Var beta_kl_to_uniform(Var a, Var b) {
    Var s = a + b;
    Var kl = lgamma(s) - lgamma(a) - lgamma(b);
    kl = kl + (a - 1.0) * (digamma_v(a) - digamma_v(s));
    kl = kl + (b - 1.0) * (digamma_v(b) - digamma_v(s));
    return kl;
}

Var beta_evidence_loss_impl(Var e_pos, Var e_neg, Var g, double anneal) {
    Var alpha = e_pos + 1.0;
    Var beta = e_neg + 1.0;
    Var s = alpha + beta;
    Var p_pos = alpha / s;
    Var p_neg = beta / s;
    Var one_minus_g = 1.0 - g;

    Var bias = (g - p_pos) * (g - p_pos) + (one_minus_g - p_neg) * (one_minus_g - p_neg);
    Var variance = (p_pos * (1.0 - p_pos) + p_neg * (1.0 - p_neg)) / (s + 1.0);
    Var mse = bias + variance;

    // Remove the evidence of the true class before regularizing toward the
    // uniform Beta, so correct confident predictions are not penalized.
    Var a_tilde = g + one_minus_g * alpha;
    Var b_tilde = one_minus_g + g * beta;
    Var kl = beta_kl_to_uniform(a_tilde, b_tilde);
    return mse + kl * anneal;
}

} // namespace

Var loss_beta_evidence(Var e_pos, Var e_neg, double g, double anneal) {
    if (g != 0.0 && g != 1.0) throw std::invalid_argument("beta evidence label must be 0 or 1");
    Tape& t = *e_pos.tape;
    return beta_evidence_loss_impl(e_pos, e_neg, t.constant(g), anneal);
}

Var loss_beta_evidence_vec(Var e_pos, Var e_neg, const std::vector<double>& labels, double anneal) {
    Tape& t = *e_pos.tape;
    if (t.value(e_pos).size() != labels.size()) {
        throw std::invalid_argument("beta evidence: evidence/label count mismatch");
    }
    Var g = t.constant(Tensor::vector(std::vector<double>(labels)));
    return beta_evidence_loss_impl(e_pos, e_neg, g, anneal);
}

Var classification_loss_vec(Tape& t, HeadKind head, Var logits, const std::vector<double>& labels,
                            double anneal) {
    HeadOutputs out = head_outputs(t, head, logits);
    if (head == HeadKind::cross_entropy) {
        return loss_cross_entropy_vec(out.confidence, labels);
    }
    return loss_beta_evidence_vec(out.evidence->first, out.evidence->second, labels, anneal);
}

Var kl_to_standard_normal(Var mu, Var sigma) {
    Var term = mu * mu + sigma * sigma - 1.0 - log(sigma) * 2.0;
    return sum(term) * 0.5;
}

Var kl_to_standard_normal_rows(Var mu, Var sigma) {
    Var term = mu * mu + sigma * sigma - 1.0 - log(sigma) * 2.0;
    return sum_cols(term) * 0.5;
}

double kl_to_standard_normal(const Tensor& mu, const Tensor& sigma) {
    check_same_shape(mu, sigma, "kl_to_standard_normal");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!(sigma[i] > 0.0)) throw NumericalError("kl_to_standard_normal: sigma must be > 0");
        acc += 0.5 * (mu[i] * mu[i] + sigma[i] * sigma[i] - 1.0 - 2.0 * std::log(sigma[i]));
    }
    return acc;
}

double wgan_gp_loss_value(const Tensor& d_real, const Tensor& d_fake, const Tensor& grad_norms,
                          double lambda_gp) {
    double pen = 0.0;
    for (std::size_t i = 0; i < grad_norms.size(); ++i) {
        double d = grad_norms[i] - 1.0;
        pen += d * d;
    }
    pen /= static_cast<double>(grad_norms.size());
    return mean(d_fake) - mean(d_real) + lambda_gp * pen;
}

CriticLossParts wgan_gp_critic_loss(Tape& t, const DenseNet& critic, const DenseNet::Binding& binding,
                                    const Tensor& real, const Tensor& fake, double lambda_gp, Rng& rng) {
    check_same_shape(real, fake, "wgan_gp_critic_loss");
    if (real.rank() != 2) throw std::invalid_argument("wgan_gp_critic_loss: batches must be [n,d]");
    std::size_t n = real.rows(), d = real.cols();

    Var d_real = take_column(critic.forward(t, binding, t.constant(real)), 0);
    Var d_fake = take_column(critic.forward(t, binding, t.constant(fake)), 0);

    // Per-sample convex combination of real and fake.
    std::vector<double> mix(n * d);
    for (std::size_t i = 0; i < n; ++i) {
        double u = rng.uniform();
        for (std::size_t j = 0; j < d; ++j) {
            mix[i * d + j] = u * real[i * d + j] + (1.0 - u) * fake[i * d + j];
        }
    }
    Var x_hat = t.leaf(Tensor::from({n, d}, std::move(mix)), true);
    Var d_hat = take_column(critic.forward(t, binding, x_hat), 0);
    Var gx = t.grad_var(sum(d_hat), x_hat); // [n,d], rows are per-sample gradients
    // the epsilon keeps the penalty differentiable when a sample's gradient
    // row is exactly zero (dead relu path)
    Var norms = sqrt(sum_cols(gx * gx) + 1e-12);
    Var penalty = mean((norms - 1.0) * (norms - 1.0));
    Var wasserstein = mean(d_fake) - mean(d_real);
    CriticLossParts parts;
    parts.wasserstein = wasserstein;
    parts.penalty = penalty;
    parts.total = wasserstein + penalty * lambda_gp;
    return parts;
}

} // namespace advaug
