#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "advaug/rng.hpp"
#include "advaug/tape.hpp"
#include "advaug/tensor.hpp"

namespace advaug {

enum class Activation : std::uint8_t { identity, relu, tanh, sigmoid, softplus };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
    Tensor w; // [in, out]
    Tensor b; // [out]
    Activation act = Activation::identity;
    bool spectral = false;
    // Persistent power-iteration state for spectral layers. The forward pass
    // treats u/v as constants and divides by sigma = u^T W v, so gradients of
    // a spectral layer are exact for the frozen u/v.
    Tensor sn_u; // [in]
    Tensor sn_v; // [out]
};

// Plain fully-connected stack; the desk-scale stand-in for every network in
// the pipeline (classifier, encoder, generator, critic).
class DenseNet {
public:
    DenseNet() = default;

    // extents = {in, h1, ..., out}; acts has extents.size()-1 entries.
    static DenseNet make(const std::vector<std::size_t>& extents,
                         const std::vector<Activation>& acts, Rng& rng, bool spectral = false);

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t layer_count() const { return layers_.size(); }
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    // Pure inference; safe to call concurrently on a frozen model.
    // x is [d] or [n,d]; result shape follows the input's rank.
    Tensor forward(const Tensor& x) const;

    struct Binding {
        std::vector<Var> weights;
        std::vector<Var> biases;
    };
    // Record parameters as gradient leaves (one fresh binding per tape).
    Binding bind(Tape& t) const;
    Var forward(Tape& t, const Binding& binding, Var x) const;
    // Parameters enter as constants; use when only the input is attacked.
    Var forward_frozen(Tape& t, Var x) const;

    // Registry for the optimizer: weights and biases in layer order.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;

    // Refresh power-iteration estimates on all spectral layers.
    void update_spectral(int power_iters);

    bool parameters_finite() const;

private:
    Var apply_layers(Tape& t, const std::vector<Var>& ws, const std::vector<Var>& bs, Var x) const;
    std::vector<DenseLayer> layers_;
};

// W / max(sigma_hat, 1e-12) with sigma_hat from `power_iters` rounds of power
// iteration started at a deterministic ones vector.
Tensor spectral_normalize(const Tensor& w, int power_iters);

// One power-iteration update of (u, v) in place; returns the sigma estimate.
double spectral_power_step(const Tensor& w, Tensor& u, Tensor& v, int iters);

} // namespace advaug
