#pragma once

#include <optional>
#include <vector>

#include "advaug/net.hpp"

namespace advaug {

enum class HeadKind : std::uint8_t { cross_entropy, beta };

const char* head_name(HeadKind h);
HeadKind head_from_name(const std::string& name);

// Positive/negative evidence pair from the beta head. confidence is the
// Beta mean alpha/(alpha+beta); uncertainty 2/(alpha+beta) peaks at 1 for
// zero evidence.
struct EvidenceOutput {
    double e_pos = 0.0;
    double e_neg = 0.0;

    double alpha() const { return e_pos + 1.0; }
    double beta() const { return e_neg + 1.0; }
    double confidence() const { return alpha() / (alpha() + beta()); }
    double uncertainty() const { return 2.0 / (alpha() + beta()); }
};

struct ClassifyResult {
    double probability = 0.0; // confidence readout for either head
    std::optional<EvidenceOutput> evidence;
};

// Classifier with an interchangeable output head. The net emits 1 logit for
// the cross-entropy head, 2 for the beta head.
struct Classifier {
    DenseNet net;
    HeadKind head = HeadKind::cross_entropy;

    static Classifier make(const std::vector<std::size_t>& hidden, std::size_t input_dim,
                           HeadKind head, Rng& rng);

    std::size_t input_dim() const { return net.input_dim(); }

    // Pure; safe for concurrent use on a frozen model.
    ClassifyResult classify(const Tensor& x) const;
    double confidence(const Tensor& x) const { return classify(x).probability; }
    std::vector<double> confidences(const Tensor& batch) const;
};

// On-tape head readouts given raw logits [n,1] or [n,2].
struct HeadOutputs {
    Var confidence;                // [n]
    std::optional<std::pair<Var, Var>> evidence; // (e_pos, e_neg) [n], beta head only
};
HeadOutputs head_outputs(Tape& t, HeadKind head, Var logits);

} // namespace advaug
