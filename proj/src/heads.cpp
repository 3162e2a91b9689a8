#include "advaug/heads.hpp"

#include <cmath>

#include "advaug/errors.hpp"

namespace advaug {

const char* head_name(HeadKind h) {
    return h == HeadKind::cross_entropy ? "ce" : "beta";
}

HeadKind head_from_name(const std::string& name) {
    if (name == "ce" || name == "cross-entropy") return HeadKind::cross_entropy;
    if (name == "beta") return HeadKind::beta;
    throw ConfigError("unknown head kind: " + name);
}

Classifier Classifier::make(const std::vector<std::size_t>& hidden, std::size_t input_dim,
                            HeadKind head, Rng& rng) {
    std::vector<std::size_t> extents{input_dim};
    extents.insert(extents.end(), hidden.begin(), hidden.end());
    extents.push_back(head == HeadKind::cross_entropy ? 1 : 2);
    std::vector<Activation> acts(extents.size() - 1, Activation::relu);
    acts.back() = Activation::identity; // raw logits; the head maps them
    Classifier c;
    c.net = DenseNet::make(extents, acts, rng);
    c.head = head;
    return c;
}

ClassifyResult Classifier::classify(const Tensor& x) const {
    Tensor logits = net.forward(x); // [1] or [2]
    ClassifyResult r;
    if (head == HeadKind::cross_entropy) {
        double z = logits[0];
        r.probability = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    } else {
        auto sp = [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
        EvidenceOutput e{sp(logits[0]), sp(logits[1])};
        r.probability = e.confidence();
        r.evidence = e;
    }
    return r;
}

std::vector<double> Classifier::confidences(const Tensor& batch) const {
    Tensor logits = net.forward(batch); // [n,1] or [n,2]
    std::size_t n = logits.rows();
    std::vector<double> out(n);
    auto sp = [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
    for (std::size_t i = 0; i < n; ++i) {
        if (head == HeadKind::cross_entropy) {
            double z = logits.at(i, 0);
            out[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        } else {
            EvidenceOutput e{sp(logits.at(i, 0)), sp(logits.at(i, 1))};
            out[i] = e.confidence();
        }
    }
    return out;
}

HeadOutputs head_outputs(Tape& t, HeadKind head, Var logits) {
    const Tensor& lv = t.value(logits);
    if (lv.rank() != 2) {
        throw std::invalid_argument("head_outputs: logits must be [n,k], got " + format_shape(lv.shape()));
    }
    HeadOutputs out{};
    if (head == HeadKind::cross_entropy) {
        if (lv.cols() != 1) throw std::invalid_argument("cross-entropy head expects 1 logit column");
        out.confidence = sigmoid(take_column(logits, 0));
    } else {
        if (lv.cols() != 2) throw std::invalid_argument("beta head expects 2 logit columns");
        Var e_pos = softplus(take_column(logits, 0));
        Var e_neg = softplus(take_column(logits, 1));
        Var alpha = e_pos + 1.0;
        Var beta = e_neg + 1.0;
        out.confidence = alpha / (alpha + beta);
        out.evidence = std::pair{e_pos, e_neg};
    }
    return out;
}

} // namespace advaug
