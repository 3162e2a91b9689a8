#include "advaug/synthesizer.hpp"

#include <cmath>
#include <stdexcept>

#include "advaug/errors.hpp"

namespace advaug {

SynthesizerBundle SynthesizerBundle::make(std::size_t data_dim, std::size_t latent_dim,
                                          std::size_t hidden, Activation output_act, Rng& rng) {
    if (latent_dim == 0) throw ConfigError("synthesizer: latent dimension must be >= 1");
    SynthesizerBundle b;
    b.latent_dim = latent_dim;
    Rng enc_rng = rng.child("encoder");
    Rng gen_rng = rng.child("generator");
    Rng critic_rng = rng.child("critic");
    b.encoder = DenseNet::make({data_dim, hidden, 2 * latent_dim},
                               {Activation::tanh, Activation::identity}, enc_rng);
    b.generator = DenseNet::make({latent_dim, hidden, data_dim},
                                 {Activation::tanh, output_act}, gen_rng);
    b.critic = DenseNet::make({data_dim, hidden, 1}, {Activation::relu, Activation::identity},
                              critic_rng, /*spectral=*/true);
    b.validate();
    return b;
}

void SynthesizerBundle::validate() const {
    if (generator.input_dim() != latent_dim) {
        throw ConfigError("synthesizer: generator input extent " + std::to_string(generator.input_dim()) +
                          " != latent dimension " + std::to_string(latent_dim));
    }
    if (encoder.output_dim() != 2 * latent_dim) {
        throw ConfigError("synthesizer: encoder must emit 2*latent_dim values");
    }
    if (critic.output_dim() != 1) throw ConfigError("synthesizer: critic output must be scalar");
    if (critic.input_dim() != generator.output_dim()) {
        throw ConfigError("synthesizer: critic input extent does not match generator output");
    }
}

namespace {

// Columns [lo, hi) of m as a new [n, hi-lo] var, built from the column
// primitives (latent dims are small, so the op count stays trivial).
Var slice_cols(Tape& t, Var m, std::size_t lo, std::size_t hi) {
    std::size_t width = hi - lo;
    Var acc{};
    for (std::size_t j = lo; j < hi; ++j) {
        Var col = put_column(take_column(m, j), j - lo, width);
        acc = (j == lo) ? col : acc + col;
    }
    (void)t;
    return acc;
}

} // namespace

std::pair<Var, Var> encoder_heads(Tape& t, Var enc_out, std::size_t latent_dim) {
    const Tensor& v = t.value(enc_out);
    if (v.rank() != 2 || v.cols() != 2 * latent_dim) {
        throw std::invalid_argument("encoder_heads: expected [n," + std::to_string(2 * latent_dim) +
                                    "], got " + format_shape(v.shape()));
    }
    Var mu = slice_cols(t, enc_out, 0, latent_dim);
    Var half_log_var = slice_cols(t, enc_out, latent_dim, 2 * latent_dim);
    return {mu, exp(half_log_var)};
}

std::pair<Tensor, Tensor> encode(const SynthesizerBundle& bundle, const Tensor& x) {
    bool single = x.rank() == 1;
    Tensor out = bundle.encoder.forward(x);
    std::size_t dz = bundle.latent_dim;
    std::size_t n = single ? 1 : out.rows();
    std::vector<double> mu(n * dz), sigma(n * dz);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dz; ++j) {
            double m = single ? out[j] : out.at(i, j);
            double h = single ? out[dz + j] : out.at(i, dz + j);
            mu[i * dz + j] = m;
            sigma[i * dz + j] = std::exp(h);
        }
    }
    if (single) {
        return {Tensor::from({dz}, std::move(mu)), Tensor::from({dz}, std::move(sigma))};
    }
    return {Tensor::from({n, dz}, std::move(mu)), Tensor::from({n, dz}, std::move(sigma))};
}

Var reparameterize(Var mu, Var sigma, const Tensor& noise) {
    Tape& t = *mu.tape;
    check_same_shape(t.value(mu), noise, "reparameterize");
    return mu + sigma * t.constant(noise);
}

Tensor reparameterize_value(const Tensor& mu, const Tensor& sigma, Rng& rng) {
    check_same_shape(mu, sigma, "reparameterize");
    std::vector<double> z(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) z[i] = mu[i] + sigma[i] * rng.normal();
    return Tensor::from(mu.shape(), std::move(z));
}

Tensor standard_normal(Shape shape, Rng& rng) {
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = rng.normal();
    return Tensor::from(std::move(shape), std::move(data));
}

Tensor synthesize_like(const SynthesizerBundle& bundle, const Tensor& batch, Rng& rng) {
    auto [mu, sigma] = encode(bundle, batch);
    Tensor z = reparameterize_value(mu, sigma, rng);
    return bundle.generator.forward(z);
}

Tensor generate(const SynthesizerBundle& bundle, const Tensor& z) {
    return bundle.generator.forward(z);
}

GenLossBuild synthesizer_gen_loss(Tape& t, const SynthesizerBundle& bundle, const Tensor& batch,
                                  const Tensor& noise, double d_real_mean) {
    if (batch.rank() != 2) throw std::invalid_argument("synthesizer_gen_loss: batch must be [n,d]");
    GenLossBuild b;
    b.encoder_binding = bundle.encoder.bind(t);
    b.generator_binding = bundle.generator.bind(t);

    Var x = t.constant(batch);
    Var enc_out = bundle.encoder.forward(t, b.encoder_binding, x);
    auto [mu, sigma] = encoder_heads(t, enc_out, bundle.latent_dim);
    Var z = reparameterize(mu, sigma, noise);
    b.x_tilde = bundle.generator.forward(t, b.generator_binding, z);

    b.reconstruction = mean(abs(b.x_tilde - x));
    b.kl = mean(kl_to_standard_normal_rows(mu, sigma));
    Var d_fake = take_column(bundle.critic.forward_frozen(t, b.x_tilde), 0);
    b.adversarial = mean(d_fake) - d_real_mean;
    b.total = b.reconstruction + b.kl * bundle.lambda1 - b.adversarial * bundle.lambda2;
    return b;
}

SynthesizerLosses synthesizer_total_loss(const SynthesizerBundle& bundle, const Tensor& batch, Rng& rng) {
    if (batch.rank() != 2 || batch.rows() == 0) {
        throw std::invalid_argument("synthesizer_total_loss: batch must be non-empty [n,d]");
    }
    SynthesizerLosses out;
    Tensor fake = synthesize_like(bundle, batch, rng);
    {
        Tape t;
        auto binding = bundle.critic.bind(t);
        CriticLossParts parts =
            wgan_gp_critic_loss(t, bundle.critic, binding, batch, fake, bundle.lambda_gp, rng);
        out.critic_loss = t.value(parts.total).item();
    }
    {
        Tape t;
        Tensor noise = standard_normal({batch.rows(), bundle.latent_dim}, rng);
        Tensor d_real = bundle.critic.forward(batch);
        double d_real_mean = mean(d_real);
        GenLossBuild gb = synthesizer_gen_loss(t, bundle, batch, noise, d_real_mean);
        out.gen_loss = t.value(gb.total).item();
        out.reconstruction = t.value(gb.reconstruction).item();
        out.kl = t.value(gb.kl).item();
        out.adversarial = t.value(gb.adversarial).item();
    }
    return out;
}

} // namespace advaug
