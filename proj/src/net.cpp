#include "advaug/net.hpp"

#include <cmath>
#include <stdexcept>

#include "advaug/errors.hpp"

namespace advaug {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softplus: return "softplus";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "softplus") return Activation::softplus;
    throw ConfigError("unknown activation: " + name);
}

namespace {

Var apply_activation(Var x, Activation act) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::relu: return relu(x);
        case Activation::tanh: return tanh(x);
        case Activation::sigmoid: return sigmoid(x);
        case Activation::softplus: return softplus(x);
    }
    return x;
}

double apply_activation_value(double x, Activation act) {
    switch (act) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::tanh: return std::tanh(x);
        case Activation::sigmoid: return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        case Activation::softplus: return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }
    return x;
}

// Deterministic unit-vector init for power iteration, seeded from the matrix
// content. A fixed all-ones start can land nearly orthogonal to the top
// singular vector and stall the first few iterations.
void seed_spectral_state(const Tensor& w, Tensor& u, Tensor& v) {
    std::size_t in = w.rows(), out = w.cols();
    Rng rng(splitmix64(fnv1a64(w.data().data(), w.size() * sizeof(double))));
    auto unit = [&](std::size_t n) {
        std::vector<double> raw(n);
        double norm = 0.0;
        for (auto& x : raw) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            for (auto& x : raw) x = 1.0 / std::sqrt(static_cast<double>(n));
        } else {
            for (auto& x : raw) x /= norm;
        }
        return Tensor::from({n}, std::move(raw));
    };
    u = unit(in);
    v = unit(out);
}

} // namespace

DenseNet DenseNet::make(const std::vector<std::size_t>& extents,
                        const std::vector<Activation>& acts, Rng& rng, bool spectral) {
    if (extents.size() < 2) throw ConfigError("DenseNet needs at least input and output extents");
    if (acts.size() != extents.size() - 1) {
        throw ConfigError("DenseNet: " + std::to_string(extents.size() - 1) + " layers but " +
                          std::to_string(acts.size()) + " activations");
    }
    DenseNet net;
    for (std::size_t l = 0; l + 1 < extents.size(); ++l) {
        std::size_t in = extents[l], out = extents[l + 1];
        if (in == 0 || out == 0) throw ConfigError("DenseNet: zero layer extent");
        double std_dev = acts[l] == Activation::relu ? std::sqrt(2.0 / static_cast<double>(in))
                                                     : std::sqrt(1.0 / static_cast<double>(in));
        std::vector<double> w(in * out);
        for (auto& v : w) v = rng.normal(0.0, std_dev);
        DenseLayer layer;
        layer.w = Tensor::from({in, out}, std::move(w));
        layer.b = Tensor::zeros({out});
        layer.act = acts[l];
        layer.spectral = spectral;
        if (spectral) {
            seed_spectral_state(layer.w, layer.sn_u, layer.sn_v);
        }
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

std::size_t DenseNet::input_dim() const {
    if (layers_.empty()) throw std::logic_error("DenseNet: empty network");
    return layers_.front().w.rows();
}

std::size_t DenseNet::output_dim() const {
    if (layers_.empty()) throw std::logic_error("DenseNet: empty network");
    return layers_.back().w.cols();
}

Tensor DenseNet::forward(const Tensor& x) const {
    bool single = x.rank() == 1;
    Tensor h = single ? Tensor::from({1, x.size()}, std::vector<double>(x.data().begin(), x.data().end()))
                      : x;
    if (h.rank() != 2 || h.cols() != input_dim()) {
        throw std::invalid_argument("DenseNet::forward: input shape " + format_shape(x.shape()) +
                                    " does not match input extent " + std::to_string(input_dim()));
    }
    for (const auto& layer : layers_) {
        Tensor w_eff = layer.w;
        if (layer.spectral) {
            double sigma = 0.0;
            {
                // sigma = u^T W v with the stored state
                const Tensor& w = layer.w;
                std::size_t in = w.rows(), out = w.cols();
                std::vector<double> wv(in, 0.0);
                for (std::size_t i = 0; i < in; ++i)
                    for (std::size_t j = 0; j < out; ++j) wv[i] += w[i * out + j] * layer.sn_v[j];
                for (std::size_t i = 0; i < in; ++i) sigma += layer.sn_u[i] * wv[i];
            }
            sigma = std::max(sigma, 1e-12);
            w_eff = layer.w * (1.0 / sigma);
        }
        Tensor z = matmul(h, w_eff);
        std::size_t n = z.rows(), m = z.cols();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
                z[i * m + j] = apply_activation_value(z[i * m + j] + layer.b[j], layer.act);
        h = std::move(z);
    }
    if (single) {
        return Tensor::from({h.cols()}, std::vector<double>(h.data().begin(), h.data().end()));
    }
    return h;
}

DenseNet::Binding DenseNet::bind(Tape& t) const {
    Binding binding;
    for (const auto& layer : layers_) {
        binding.weights.push_back(t.leaf(layer.w, true));
        binding.biases.push_back(t.leaf(layer.b, true));
    }
    return binding;
}

Var DenseNet::apply_layers(Tape& t, const std::vector<Var>& ws, const std::vector<Var>& bs, Var x) const {
    // note: recording ops can reallocate the tape's node storage, so no
    // reference into t.value() may be held across record calls
    const bool single = t.value(x).rank() == 1;
    const Shape in_shape = t.value(x).shape();
    Var h = x;
    if (single) h = reshape(x, {1, shape_numel(in_shape)});
    if (t.value(h).cols() != input_dim()) {
        throw std::invalid_argument("DenseNet::forward: input shape " + format_shape(in_shape) +
                                    " does not match input extent " + std::to_string(input_dim()));
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Var w = ws[l];
        if (layers_[l].spectral) {
            std::size_t in = layers_[l].w.rows(), out = layers_[l].w.cols();
            Var u = t.constant(Tensor::from({1, in}, std::vector<double>(layers_[l].sn_u.data().begin(),
                                                                         layers_[l].sn_u.data().end())));
            Var v = t.constant(Tensor::from({out, 1}, std::vector<double>(layers_[l].sn_v.data().begin(),
                                                                          layers_[l].sn_v.data().end())));
            Var sigma = reshape(matmul(matmul(u, w), v), Shape{});
            w = w / emax(sigma, t.constant(1e-12));
        }
        Var z = add_rowvec(matmul(h, w), bs[l]);
        h = apply_activation(z, layers_[l].act);
    }
    if (single) h = reshape(h, {t.value(h).cols()});
    return h;
}

Var DenseNet::forward(Tape& t, const Binding& binding, Var x) const {
    return apply_layers(t, binding.weights, binding.biases, x);
}

Var DenseNet::forward_frozen(Tape& t, Var x) const {
    std::vector<Var> ws, bs;
    for (const auto& layer : layers_) {
        ws.push_back(t.constant(layer.w));
        bs.push_back(t.constant(layer.b));
    }
    return apply_layers(t, ws, bs, x);
}

std::vector<Tensor*> DenseNet::parameters() {
    std::vector<Tensor*> ps;
    for (auto& layer : layers_) {
        ps.push_back(&layer.w);
        ps.push_back(&layer.b);
    }
    return ps;
}

std::vector<const Tensor*> DenseNet::parameters() const {
    std::vector<const Tensor*> ps;
    for (const auto& layer : layers_) {
        ps.push_back(&layer.w);
        ps.push_back(&layer.b);
    }
    return ps;
}

void DenseNet::update_spectral(int power_iters) {
    for (auto& layer : layers_) {
        if (layer.spectral) spectral_power_step(layer.w, layer.sn_u, layer.sn_v, power_iters);
    }
}

bool DenseNet::parameters_finite() const {
    for (const auto& layer : layers_) {
        if (!layer.w.all_finite() || !layer.b.all_finite()) return false;
    }
    return true;
}

double spectral_power_step(const Tensor& w, Tensor& u, Tensor& v, int iters) {
    if (w.rank() != 2) throw std::invalid_argument("spectral: expected a matrix, got " + format_shape(w.shape()));
    if (iters < 1) throw std::invalid_argument("spectral: power iterations must be >= 1");
    std::size_t in = w.rows(), out = w.cols();
    if (u.size() != in || v.size() != out) {
        seed_spectral_state(w, u, v);
    }
    for (int it = 0; it < iters; ++it) {
        // u <- normalize(W v); v <- normalize(W^T u)
        std::vector<double> wu(in, 0.0);
        for (std::size_t i = 0; i < in; ++i)
            for (std::size_t j = 0; j < out; ++j) wu[i] += w[i * out + j] * v[j];
        double nu = 0.0;
        for (double x : wu) nu += x * x;
        nu = std::sqrt(nu);
        if (nu > 1e-12) {
            for (std::size_t i = 0; i < in; ++i) u[i] = wu[i] / nu;
        }
        std::vector<double> wv(out, 0.0);
        for (std::size_t i = 0; i < in; ++i)
            for (std::size_t j = 0; j < out; ++j) wv[j] += w[i * out + j] * u[i];
        double nv = 0.0;
        for (double x : wv) nv += x * x;
        nv = std::sqrt(nv);
        if (nv > 1e-12) {
            for (std::size_t j = 0; j < out; ++j) v[j] = wv[j] / nv;
        }
    }
    double sigma = 0.0;
    for (std::size_t i = 0; i < in; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < out; ++j) dot += w[i * out + j] * v[j];
        sigma += u[i] * dot;
    }
    return sigma;
}

Tensor spectral_normalize(const Tensor& w, int power_iters) {
    Tensor u, v;
    double sigma = spectral_power_step(w, u, v, power_iters);
    // Cold start: keep iterating until the estimate settles, so the result
    // stays within tolerance even when the top singular values are close.
    for (int i = 0; i < 5000; ++i) {
        double next = spectral_power_step(w, u, v, 1);
        bool settled = std::abs(next - sigma) <= 1e-9 * std::max(std::abs(next), 1e-30);
        sigma = next;
        if (settled) break;
    }
    sigma = std::max(sigma, 1e-12);
    return w * (1.0 / sigma);
}

} // namespace advaug
