#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "advaug/datagen.hpp"
#include "advaug/heads.hpp"
#include "advaug/rng.hpp"
#include "advaug/synthesizer.hpp"

namespace advaug {

struct AdamState {
    double lr = 1e-3; // published default
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;
    long step = 0;
    struct Slot {
        Tensor m;
        Tensor v;
    };
    std::vector<Slot> slots;

    static AdamState for_params(const std::vector<Tensor*>& params, double lr = 1e-3);
};

// Standard bias-corrected update, in place.
void adam_step(AdamState& state, const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

struct TrainConfig {
    std::size_t epochs = 60;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    std::size_t patience = 10;      // early stopping on the validation loss
    double val_fraction = 0.1;
    std::size_t anneal_epochs = 20; // beta-loss KL ramp 0 -> 1

    void validate() const;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
};

nlohmann::json history_to_json(const TrainHistory& history);

// Balanced 50/50 positive/negative batches on real data. Restores the
// best-validation weights when early stopping triggers.
TrainHistory train_baseline(Classifier& model, const std::vector<LabeledExample>& data,
                            const TrainConfig& cfg);

// Batch composition for fine-tuning; fractions of the positive and negative
// halves must each sum to 1.
struct SamplingSchedule {
    double positive_fraction = 0.5;
    double pos_real = 0.5;
    double pos_synthetic = 0.25;
    double pos_perturbed = 0.25;
    double neg_real = 0.5;
    double neg_noise = 0.5;
    // Table-style "+poisson" training: the noise slots carry Poisson-noised
    // positives that keep their positive label.
    bool poisson_positive_in_noise_slot = false;
    double poisson_scale = 50.0;

    void validate() const;

    static SamplingSchedule baseline();     // 50% real pos, 50% real neg
    static SamplingSchedule augment();      // published ratios, all three pools
    static SamplingSchedule syn_only();     // positives: 50% real / 50% synthetic
    static SamplingSchedule perturb_only(); // perturbed positives + noise negatives
    static SamplingSchedule poisson_mode(); // noise slots -> poisson positives
};

struct AugmentationPools {
    std::vector<LabeledExample> synthetic; // label 1
    std::vector<LabeledExample> perturbed; // label 1
    std::vector<LabeledExample> noise;     // label 0
};

// Per-batch slot sizes realized by a schedule (residual rounding lands on
// the real-data slots).
struct SlotCounts {
    std::size_t real_pos = 0;
    std::size_t synthetic = 0;
    std::size_t perturbed = 0;
    std::size_t real_neg = 0;
    std::size_t noise = 0;
};
SlotCounts slot_counts(const SamplingSchedule& schedule, std::size_t batch_size);

// Reuse a trained cross-entropy trunk under a fresh beta head (the staged
// "train CE first, finetune with the beta loss" setup).
Classifier with_beta_head(const Classifier& ce_model, Rng& rng);

// Stratified batches honoring the schedule exactly whenever the slot counts
// divide the batch size; pools are cycled without replacement per epoch.
TrainHistory finetune_augmented(Classifier& model, const std::vector<LabeledExample>& real_data,
                                const AugmentationPools& pools, const SamplingSchedule& schedule,
                                const TrainConfig& cfg);

struct SynthTrainConfig {
    std::size_t epochs = 150;
    std::size_t batch_size = 10;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    int n_critic = 5;
    int spectral_iters = 1;

    void validate() const;
};

struct SynthEpochStats {
    double critic_loss = 0.0;
    double gen_loss = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
};

std::vector<SynthEpochStats> train_synthesizer(SynthesizerBundle& bundle, const Tensor& data,
                                               const SynthTrainConfig& cfg);

// Row-major feature matrix + label vector from examples.
std::pair<Tensor, std::vector<double>> stack_examples(const std::vector<const LabeledExample*>& batch);
Tensor stack_features(const std::vector<LabeledExample>& examples);

double accuracy(const Classifier& model, const std::vector<LabeledExample>& data);

} // namespace advaug
