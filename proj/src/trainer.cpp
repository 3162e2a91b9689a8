#include "advaug/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "advaug/errors.hpp"
#include "advaug/losses.hpp"

namespace advaug {

AdamState AdamState::for_params(const std::vector<Tensor*>& params, double lr) {
    AdamState s;
    s.lr = lr;
    s.slots.reserve(params.size());
    for (const Tensor* p : params) {
        s.slots.push_back({Tensor::zeros(p->shape()), Tensor::zeros(p->shape())});
    }
    return s;
}

void adam_step(AdamState& state, const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != state.slots.size() || params.size() != grads.size()) {
        throw std::invalid_argument("adam_step: parameter/gradient/slot count mismatch");
    }
    ++state.step;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        check_same_shape(p, g, "adam_step");
        Tensor& m = state.slots[i].m;
        Tensor& v = state.slots[i].v;
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
            double m_hat = m[k] / bc1;
            double v_hat = v[k] / bc2;
            p[k] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps_hat);
        }
    }
}

void TrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("train: batch size must be >= 2");
    if (batch_size % 2 != 0) throw ConfigError("train: batch size must be even for 50/50 sampling");
    if (!(lr > 0.0)) throw ConfigError("train: learning rate must be > 0");
    if (val_fraction < 0.0 || val_fraction >= 1.0) throw ConfigError("train: val fraction in [0,1)");
}

nlohmann::json history_to_json(const TrainHistory& history) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : history.epochs) {
        epochs.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
    }
    return nlohmann::json{{"epochs", std::move(epochs)},
                          {"best_epoch", history.best_epoch},
                          {"early_stopped", history.early_stopped}};
}

void SamplingSchedule::validate() const {
    if (positive_fraction <= 0.0 || positive_fraction >= 1.0) {
        throw ConfigError("schedule: positive fraction must be in (0,1)");
    }
    auto sums_to_one = [](double a, double b, double c) { return std::abs(a + b + c - 1.0) < 1e-9; };
    if (!sums_to_one(pos_real, pos_synthetic, pos_perturbed)) {
        throw ConfigError("schedule: positive mix must sum to 1");
    }
    if (!sums_to_one(neg_real, neg_noise, 0.0)) {
        throw ConfigError("schedule: negative mix must sum to 1");
    }
    if (pos_real < 0 || pos_synthetic < 0 || pos_perturbed < 0 || neg_real < 0 || neg_noise < 0) {
        throw ConfigError("schedule: mix fractions must be >= 0");
    }
    if (!(poisson_scale > 0.0)) throw ConfigError("schedule: poisson scale must be > 0");
}

SamplingSchedule SamplingSchedule::baseline() {
    SamplingSchedule s;
    s.pos_real = 1.0;
    s.pos_synthetic = 0.0;
    s.pos_perturbed = 0.0;
    s.neg_real = 1.0;
    s.neg_noise = 0.0;
    return s;
}

SamplingSchedule SamplingSchedule::augment() { return SamplingSchedule{}; }

SamplingSchedule SamplingSchedule::syn_only() {
    SamplingSchedule s;
    s.pos_real = 0.5;
    s.pos_synthetic = 0.5;
    s.pos_perturbed = 0.0;
    s.neg_real = 1.0;
    s.neg_noise = 0.0;
    return s;
}

SamplingSchedule SamplingSchedule::perturb_only() {
    SamplingSchedule s;
    s.pos_real = 0.5;
    s.pos_synthetic = 0.0;
    s.pos_perturbed = 0.5;
    s.neg_real = 0.5;
    s.neg_noise = 0.5;
    return s;
}

SamplingSchedule SamplingSchedule::poisson_mode() {
    SamplingSchedule s;
    s.pos_real = 1.0;
    s.pos_synthetic = 0.0;
    s.pos_perturbed = 0.0;
    s.neg_real = 0.5;
    s.neg_noise = 0.5;
    s.poisson_positive_in_noise_slot = true;
    return s;
}

std::pair<Tensor, std::vector<double>> stack_examples(const std::vector<const LabeledExample*>& batch) {
    if (batch.empty()) throw std::invalid_argument("stack_examples: empty batch");
    std::size_t d = batch.front()->x.size();
    std::vector<double> data;
    data.reserve(batch.size() * d);
    std::vector<double> labels;
    labels.reserve(batch.size());
    for (const LabeledExample* e : batch) {
        if (e->x.size() != d) throw std::invalid_argument("stack_examples: inconsistent feature sizes");
        data.insert(data.end(), e->x.data().begin(), e->x.data().end());
        labels.push_back(static_cast<double>(e->label));
    }
    return {Tensor::from({batch.size(), d}, std::move(data)), std::move(labels)};
}

Tensor stack_features(const std::vector<LabeledExample>& examples) {
    std::vector<const LabeledExample*> ptrs;
    ptrs.reserve(examples.size());
    for (const auto& e : examples) ptrs.push_back(&e);
    return stack_examples(ptrs).first;
}

double accuracy(const Classifier& model, const std::vector<LabeledExample>& data) {
    if (data.empty()) throw std::invalid_argument("accuracy: empty dataset");
    Tensor x = stack_features(data);
    std::vector<double> conf = model.confidences(x);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        int predicted = conf[i] > 0.5 ? 1 : 0;
        if (predicted == data[i].label) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

namespace {

// Shuffled index stream that reshuffles when exhausted (per-epoch sampling
// without replacement while the pool lasts).
class IndexStream {
public:
    IndexStream(std::size_t n, Rng rng) : rng_(rng), indices_(n) {
        for (std::size_t i = 0; i < n; ++i) indices_[i] = i;
        rng_.shuffle(indices_);
    }
    std::size_t next() {
        if (cursor_ >= indices_.size()) {
            rng_.shuffle(indices_);
            cursor_ = 0;
        }
        return indices_[cursor_++];
    }

private:
    Rng rng_;
    std::vector<std::size_t> indices_;
    std::size_t cursor_ = 0;
};

struct Split {
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> val;
};

Split split_validation(const std::vector<LabeledExample>& data, double val_fraction, Rng rng) {
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    std::size_t n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(data.size())));
    Split split;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        (i < n_val ? split.val : split.train).push_back(data[idx[i]]);
    }
    return split;
}

double anneal_weight(HeadKind head, std::size_t epoch, std::size_t anneal_epochs) {
    if (head == HeadKind::cross_entropy) return 0.0;
    if (anneal_epochs == 0) return 1.0;
    return std::min(1.0, static_cast<double>(epoch) / static_cast<double>(anneal_epochs));
}

double batch_loss_and_update(Classifier& model, const std::vector<const LabeledExample*>& batch,
                             double anneal, AdamState& opt, std::size_t batch_index) {
    auto [x, labels] = stack_examples(batch);
    Tape tape;
    DenseNet::Binding binding = model.net.bind(tape);
    Var logits = model.net.forward(tape, binding, tape.constant(x));
    Var loss = mean(classification_loss_vec(tape, model.head, logits, labels, anneal));
    double lv = tape.value(loss).item();
    if (!std::isfinite(lv)) {
        throw NumericalError("training: non-finite loss at batch " + std::to_string(batch_index));
    }
    tape.backward(loss);
    std::vector<Tensor*> params = model.net.parameters();
    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (std::size_t l = 0; l < binding.weights.size(); ++l) {
        grads.push_back(tape.grad(binding.weights[l]));
        grads.push_back(tape.grad(binding.biases[l]));
    }
    adam_step(opt, params, grads);
    if (!model.net.parameters_finite()) {
        throw NumericalError("training: non-finite parameters after batch " + std::to_string(batch_index));
    }
    return lv;
}

double dataset_loss(const Classifier& model, const std::vector<LabeledExample>& data, double anneal) {
    if (data.empty()) return 0.0;
    std::vector<const LabeledExample*> all;
    all.reserve(data.size());
    for (const auto& e : data) all.push_back(&e);
    auto [x, labels] = stack_examples(all);
    Tape tape;
    Var logits = model.net.forward_frozen(tape, tape.constant(x));
    Var loss = mean(classification_loss_vec(tape, model.head, logits, labels, anneal));
    return tape.value(loss).item();
}

struct Strata {
    std::vector<const LabeledExample*> real_pos, real_neg, synthetic, perturbed, noise;
};

} // namespace

SlotCounts slot_counts(const SamplingSchedule& s, std::size_t batch_size) {
    auto portion = [&](double f) {
        return static_cast<std::size_t>(std::llround(f * static_cast<double>(batch_size)));
    };
    std::size_t n_pos = portion(s.positive_fraction);
    std::size_t n_neg = batch_size - n_pos;
    SlotCounts c;
    c.synthetic = static_cast<std::size_t>(std::llround(s.pos_synthetic * static_cast<double>(n_pos)));
    c.perturbed = static_cast<std::size_t>(std::llround(s.pos_perturbed * static_cast<double>(n_pos)));
    c.real_pos = n_pos - c.synthetic - c.perturbed;
    c.noise = static_cast<std::size_t>(std::llround(s.neg_noise * static_cast<double>(n_neg)));
    c.real_neg = n_neg - c.noise;
    return c;
}

Classifier with_beta_head(const Classifier& ce_model, Rng& rng) {
    if (ce_model.head != HeadKind::cross_entropy) {
        throw ConfigError("with_beta_head: source model must use the cross-entropy head");
    }
    Classifier out;
    out.head = HeadKind::beta;
    out.net = ce_model.net;
    DenseLayer& last = out.net.layers().back();
    std::size_t in = last.w.rows();
    std::vector<double> w(in * 2);
    double std_dev = std::sqrt(1.0 / static_cast<double>(in));
    for (auto& v : w) v = rng.normal(0.0, std_dev);
    last.w = Tensor::from({in, 2}, std::move(w));
    last.b = Tensor::zeros({2});
    return out;
}

namespace {

TrainHistory run_training(Classifier& model, const std::vector<LabeledExample>& train_set,
                          const std::vector<LabeledExample>& val_set, const TrainConfig& cfg,
                          const SamplingSchedule& schedule, const AugmentationPools* pools) {
    Strata strata;
    for (const auto& e : train_set) {
        (e.label == 1 ? strata.real_pos : strata.real_neg).push_back(&e);
    }
    if (strata.real_pos.empty() || strata.real_neg.empty()) {
        throw ConfigError("training: dataset must contain both classes");
    }
    if (pools) {
        for (const auto& e : pools->synthetic) strata.synthetic.push_back(&e);
        for (const auto& e : pools->perturbed) strata.perturbed.push_back(&e);
        for (const auto& e : pools->noise) strata.noise.push_back(&e);
    }
    SlotCounts counts = slot_counts(schedule, cfg.batch_size);
    if (counts.synthetic > 0 && strata.synthetic.empty()) {
        throw ConfigError("training: schedule requires a synthetic pool but it is empty");
    }
    if (counts.perturbed > 0 && strata.perturbed.empty()) {
        throw ConfigError("training: schedule requires a perturbed pool but it is empty");
    }
    if (counts.noise > 0 && strata.noise.empty() && !schedule.poisson_positive_in_noise_slot) {
        throw ConfigError("training: schedule requires a noise pool but it is empty");
    }

    AdamState opt = AdamState::for_params(model.net.parameters(), cfg.lr);
    Rng master(cfg.seed);
    IndexStream pos_stream(strata.real_pos.size(), master.child("pos"));
    IndexStream neg_stream(strata.real_neg.size(), master.child("neg"));
    IndexStream syn_stream(std::max<std::size_t>(strata.synthetic.size(), 1), master.child("syn"));
    IndexStream pert_stream(std::max<std::size_t>(strata.perturbed.size(), 1), master.child("pert"));
    IndexStream noise_stream(std::max<std::size_t>(strata.noise.size(), 1), master.child("noise"));
    Rng poisson_rng = master.child("poisson");

    std::size_t batches_per_epoch =
        std::max<std::size_t>(1, (train_set.size() + cfg.batch_size - 1) / cfg.batch_size);

    TrainHistory history;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_weights;
    std::size_t since_best = 0;
    auto snapshot = [&]() {
        best_weights.clear();
        for (const Tensor* p : const_cast<const Classifier&>(model).net.parameters()) {
            best_weights.push_back(*p);
        }
    };
    auto restore = [&]() {
        if (best_weights.empty()) return;
        std::vector<Tensor*> params = model.net.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) *params[i] = best_weights[i];
    };
    snapshot();

    std::vector<LabeledExample> poisson_holder; // keeps on-the-fly patches alive per batch
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double anneal = anneal_weight(model.head, epoch, cfg.anneal_epochs);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            poisson_holder.clear();
            poisson_holder.reserve(counts.noise);
            std::vector<const LabeledExample*> batch;
            batch.reserve(cfg.batch_size);
            for (std::size_t i = 0; i < counts.real_pos; ++i) {
                batch.push_back(strata.real_pos[pos_stream.next()]);
            }
            for (std::size_t i = 0; i < counts.synthetic; ++i) {
                batch.push_back(strata.synthetic[syn_stream.next()]);
            }
            for (std::size_t i = 0; i < counts.perturbed; ++i) {
                batch.push_back(strata.perturbed[pert_stream.next()]);
            }
            for (std::size_t i = 0; i < counts.real_neg; ++i) {
                batch.push_back(strata.real_neg[neg_stream.next()]);
            }
            for (std::size_t i = 0; i < counts.noise; ++i) {
                if (schedule.poisson_positive_in_noise_slot) {
                    const LabeledExample* src = strata.real_pos[pos_stream.next()];
                    poisson_holder.push_back(
                        {poisson_noise_inject(src->x, schedule.poisson_scale, poisson_rng), 1,
                         Source::poisson});
                    batch.push_back(&poisson_holder.back());
                } else {
                    batch.push_back(strata.noise[noise_stream.next()]);
                }
            }
            epoch_loss += batch_loss_and_update(model, batch, anneal, opt, b);
        }
        epoch_loss /= static_cast<double>(batches_per_epoch);
        // validation uses the data term only so epochs stay comparable while
        // the KL weight ramps
        double val_loss = val_set.empty() ? epoch_loss : dataset_loss(model, val_set, 0.0);
        history.epochs.push_back({epoch_loss, val_loss});

        if (val_loss < best_val - 1e-12) {
            best_val = val_loss;
            history.best_epoch = epoch;
            since_best = 0;
            snapshot();
        } else if (++since_best >= cfg.patience && cfg.patience > 0) {
            history.early_stopped = true;
            break;
        }
    }
    // patience 0 disables early stopping entirely: the full budget runs and
    // the final weights stand
    if (cfg.patience > 0) {
        restore();
    } else {
        history.best_epoch = cfg.epochs - 1;
    }
    return history;
}

} // namespace

TrainHistory train_baseline(Classifier& model, const std::vector<LabeledExample>& data,
                            const TrainConfig& cfg) {
    cfg.validate();
    bool has_pos = false, has_neg = false;
    for (const auto& e : data) (e.label == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw ConfigError("train_baseline: dataset must contain both classes");
    if (cfg.epochs == 0) return {};
    Rng master(cfg.seed);
    Split split = split_validation(data, cfg.val_fraction, master.child("valsplit"));
    return run_training(model, split.train, split.val, cfg, SamplingSchedule::baseline(), nullptr);
}

TrainHistory finetune_augmented(Classifier& model, const std::vector<LabeledExample>& real_data,
                                const AugmentationPools& pools, const SamplingSchedule& schedule,
                                const TrainConfig& cfg) {
    cfg.validate();
    schedule.validate();
    for (const auto& e : pools.synthetic) {
        if (e.label != 1) throw ConfigError("finetune: synthetic pool must hold positives");
    }
    for (const auto& e : pools.perturbed) {
        if (e.label != 1) throw ConfigError("finetune: perturbed pool must hold positives");
    }
    for (const auto& e : pools.noise) {
        if (e.label != 0) throw ConfigError("finetune: noise pool must hold negatives");
    }
    if (cfg.epochs == 0) return {};
    Rng master(cfg.seed);
    Split split = split_validation(real_data, cfg.val_fraction, master.child("valsplit"));
    return run_training(model, split.train, split.val, cfg, schedule, &pools);
}

void SynthTrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("synth train: batch size must be >= 2");
    if (!(lr > 0.0)) throw ConfigError("synth train: learning rate must be > 0");
    if (n_critic < 1) throw ConfigError("synth train: n_critic must be >= 1");
    if (spectral_iters < 1) throw ConfigError("synth train: spectral iterations must be >= 1");
}

std::vector<SynthEpochStats> train_synthesizer(SynthesizerBundle& bundle, const Tensor& data,
                                               const SynthTrainConfig& cfg) {
    cfg.validate();
    bundle.validate();
    if (data.rank() != 2 || data.rows() < 2) {
        throw ConfigError("train_synthesizer: data must be [n,d] with n >= 2");
    }
    std::size_t n = data.rows(), d = data.cols();

    Rng master(cfg.seed);
    Rng shuffle_rng = master.child("shuffle");
    Rng critic_rng = master.child("critic");
    Rng gen_rng = master.child("gen");

    std::vector<Tensor*> critic_params = bundle.critic.parameters();
    AdamState critic_opt = AdamState::for_params(critic_params, cfg.lr);
    std::vector<Tensor*> gen_params;
    for (Tensor* p : bundle.encoder.parameters()) gen_params.push_back(p);
    for (Tensor* p : bundle.generator.parameters()) gen_params.push_back(p);
    AdamState gen_opt = AdamState::for_params(gen_params, cfg.lr);

    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;

    std::vector<SynthEpochStats> history;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(idx);
        SynthEpochStats stats;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t nb = std::min(cfg.batch_size, n - start);
            if (nb < 2) break;
            std::vector<double> rows;
            rows.reserve(nb * d);
            std::span<const double> flat = data.data();
            for (std::size_t i = 0; i < nb; ++i) {
                const double* src = flat.data() + idx[start + i] * d;
                rows.insert(rows.end(), src, src + d);
            }
            Tensor batch = Tensor::from({nb, d}, std::move(rows));

            for (int k = 0; k < cfg.n_critic; ++k) {
                Tensor fake = synthesize_like(bundle, batch, critic_rng);
                bundle.critic.update_spectral(cfg.spectral_iters);
                Tape t;
                DenseNet::Binding binding = bundle.critic.bind(t);
                CriticLossParts parts =
                    wgan_gp_critic_loss(t, bundle.critic, binding, batch, fake, bundle.lambda_gp,
                                        critic_rng);
                double lv = t.value(parts.total).item();
                if (!std::isfinite(lv)) {
                    throw NumericalError("train_synthesizer: non-finite critic loss at epoch " +
                                         std::to_string(epoch));
                }
                stats.critic_loss += lv;
                t.backward(parts.total);
                std::vector<Tensor> grads;
                for (std::size_t l = 0; l < binding.weights.size(); ++l) {
                    grads.push_back(t.grad(binding.weights[l]));
                    grads.push_back(t.grad(binding.biases[l]));
                }
                adam_step(critic_opt, critic_params, grads);
            }

            {
                Tape t;
                Tensor noise = standard_normal({nb, bundle.latent_dim}, gen_rng);
                double d_real_mean = mean(bundle.critic.forward(batch));
                GenLossBuild gb = synthesizer_gen_loss(t, bundle, batch, noise, d_real_mean);
                double lv = t.value(gb.total).item();
                if (!std::isfinite(lv)) {
                    throw NumericalError("train_synthesizer: non-finite generator loss at epoch " +
                                         std::to_string(epoch));
                }
                stats.gen_loss += lv;
                stats.reconstruction += t.value(gb.reconstruction).item();
                stats.kl += t.value(gb.kl).item();
                t.backward(gb.total);
                std::vector<Tensor> grads;
                for (std::size_t l = 0; l < gb.encoder_binding.weights.size(); ++l) {
                    grads.push_back(t.grad(gb.encoder_binding.weights[l]));
                    grads.push_back(t.grad(gb.encoder_binding.biases[l]));
                }
                for (std::size_t l = 0; l < gb.generator_binding.weights.size(); ++l) {
                    grads.push_back(t.grad(gb.generator_binding.weights[l]));
                    grads.push_back(t.grad(gb.generator_binding.biases[l]));
                }
                adam_step(gen_opt, gen_params, grads);
            }
            ++batches;
        }
        double denom = std::max<std::size_t>(batches, 1);
        stats.critic_loss /= denom * cfg.n_critic;
        stats.gen_loss /= denom;
        stats.reconstruction /= denom;
        stats.kl /= denom;
        history.push_back(stats);
    }
    return history;
}

} // namespace advaug
