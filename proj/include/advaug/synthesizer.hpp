#pragma once

#include <utility>

#include "advaug/losses.hpp"
#include "advaug/net.hpp"
#include "advaug/rng.hpp"

namespace advaug {

// Encoder/generator/critic triple with the synthesizer loss weights.
// The generator alone is kept for sampling once training is done.
struct SynthesizerBundle {
    DenseNet encoder;   // data_dim -> 2*latent_dim (mu then half-log-variance)
    DenseNet generator; // latent_dim -> data_dim
    DenseNet critic;    // data_dim -> 1, spectral-normalized
    std::size_t latent_dim = 0;
    double lambda1 = 1e-5;  // KL weight
    double lambda2 = 0.1;   // adversarial weight
    double lambda_gp = 10.0;

    static SynthesizerBundle make(std::size_t data_dim, std::size_t latent_dim, std::size_t hidden,
                                  Activation output_act, Rng& rng);
    void validate() const;
};

// Split an encoder output row-block [n, 2*dz] into mu [n,dz] and
// sigma = exp(half-log-variance) [n,dz].
std::pair<Var, Var> encoder_heads(Tape& t, Var enc_out, std::size_t latent_dim);

// Value-level encode of a batch [n,d] (or single [d]) -> (mu, sigma).
std::pair<Tensor, Tensor> encode(const SynthesizerBundle& bundle, const Tensor& x);

// z = mu + sigma * u with u the injected standard-normal draw. Gradients
// flow into mu and sigma; u enters as a constant.
Var reparameterize(Var mu, Var sigma, const Tensor& noise);
Tensor reparameterize_value(const Tensor& mu, const Tensor& sigma, Rng& rng);

Tensor standard_normal(Shape shape, Rng& rng);

// Value-level fake batch: encode -> reparameterize -> generate.
Tensor synthesize_like(const SynthesizerBundle& bundle, const Tensor& batch, Rng& rng);
// Decode latent codes [n,dz] (or [dz]).
Tensor generate(const SynthesizerBundle& bundle, const Tensor& z);

struct GenLossBuild {
    Var total;
    Var reconstruction; // mean |x_tilde - x|
    Var kl;             // mean per-sample KL to N(0,1)
    Var adversarial;    // mean d_fake - mean d_real (critic frozen)
    DenseNet::Binding encoder_binding;
    DenseNet::Binding generator_binding;
    Var x_tilde;
};

// Encoder+generator objective on tape: L1 reconstruction + lambda1*KL
// - lambda2*(mean d_fake - mean d_real). The gradient penalty regularizes
// only the critic and is omitted from this side.
GenLossBuild synthesizer_gen_loss(Tape& t, const SynthesizerBundle& bundle, const Tensor& batch,
                                  const Tensor& noise, double d_real_mean);

struct SynthesizerLosses {
    double critic_loss = 0.0;
    double gen_loss = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
    double adversarial = 0.0;
};

// Both objectives evaluated (no updates) for a batch; draws interpolation
// weights and latent noise from rng.
SynthesizerLosses synthesizer_total_loss(const SynthesizerBundle& bundle, const Tensor& batch, Rng& rng);

} // namespace advaug
