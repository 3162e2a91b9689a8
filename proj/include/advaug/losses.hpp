#pragma once

#include <vector>

#include "advaug/heads.hpp"
#include "advaug/net.hpp"
#include "advaug/rng.hpp"
#include "advaug/tape.hpp"

namespace advaug {

// Binary cross-entropy of a probability against a 0/1 label; p is clamped to
// [1e-7, 1-1e-7] first. Scalar and per-sample-vector variants.
Var loss_cross_entropy(Var p, double g);
Var loss_cross_entropy_vec(Var p, const std::vector<double>& labels);

// Evidence loss for the beta head: expected MSE under Beta(alpha,beta)
// against the one-hot target, plus `anneal` times the KL from the
// misleading-evidence-adjusted Beta to the uniform Beta(1,1).
Var loss_beta_evidence(Var e_pos, Var e_neg, double g, double anneal);
Var loss_beta_evidence_vec(Var e_pos, Var e_neg, const std::vector<double>& labels, double anneal);

// Per-sample classification loss [n] for a batch of logits, dispatched on
// the head kind. anneal only affects the beta head.
Var classification_loss_vec(Tape& t, HeadKind head, Var logits, const std::vector<double>& labels,
                            double anneal);

// KL(N(mu, sigma^2) || N(0,1)) summed over dimensions.
Var kl_to_standard_normal(Var mu, Var sigma);
double kl_to_standard_normal(const Tensor& mu, const Tensor& sigma);
// Per-row KL for batched [n,dz] mu/sigma.
Var kl_to_standard_normal_rows(Var mu, Var sigma);

// mean(d_fake) - mean(d_real) + lambda_gp * mean((grad_norm - 1)^2), the
// critic objective. Value-level combiner over precomputed pieces.
double wgan_gp_loss_value(const Tensor& d_real, const Tensor& d_fake, const Tensor& grad_norms,
                          double lambda_gp);

struct CriticLossParts {
    Var total;
    Var wasserstein; // mean(d_fake) - mean(d_real)
    Var penalty;     // mean((||grad||-1)^2)
};

// Full on-tape critic loss: interpolates real/fake rows with per-sample
// uniform weights, differentiates the critic response w.r.t. the
// interpolates (create-graph), and penalizes the per-sample gradient norms.
CriticLossParts wgan_gp_critic_loss(Tape& t, const DenseNet& critic, const DenseNet::Binding& binding,
                                    const Tensor& real, const Tensor& fake, double lambda_gp, Rng& rng);

} // namespace advaug
