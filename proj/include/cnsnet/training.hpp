#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <vector>

#include "cnsnet/adam.hpp"
#include "cnsnet/losses.hpp"
#include "cnsnet/network.hpp"

namespace cnsnet {

struct TrainConfig {
    int rounds = 500;
    int batch_size = 64;
    double learning_rate = 0.0002;
    LossWeights weights;
    std::uint64_t seed = 0;
    ArchitectureConfig arch;
    // Ablation switches. Disabling the synthesizer removes the D/G updates and
    // with them both regularizers (they act on synthesized instances only).
    bool enable_synthesizer = true;
    bool enable_flattening = true;
    bool enable_exclusion = true;
    bool non_saturating_generator = false;
    int checkpoint_every = 50;

    void validate() const {
        if (rounds < 1) throw InvalidConfig("train config: rounds must be >= 1");
        if (batch_size < 1) throw InvalidConfig("train config: batch size must be >= 1");
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
            throw InvalidConfig("train config: learning rate must be positive");
        if (checkpoint_every < 1) throw InvalidConfig("train config: checkpoint cadence must be >= 1");
        weights.validate();
    }

    bool flattening_active() const { return enable_synthesizer && enable_flattening; }
    bool exclusion_active() const { return enable_synthesizer && enable_exclusion; }

    // Weights as the enabled terms see them.
    LossWeights effective_weights() const {
        return LossWeights{flattening_active() ? weights.beta : 0.0,
                           exclusion_active() ? weights.gamma : 0.0};
    }
};

struct RoundRecord {
    int round = 0;
    double loss_d = 0.0;
    double loss_g = 0.0;
    double loss_p = 0.0;
    double test_acc = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
};

using TrainTrace = std::vector<RoundRecord>;

// Training view of a split: instances of the known families only, labels
// re-indexed to [0, k).
template <class T>
struct TrainingSet {
    Tensor<T> features; // [n, d]
    std::vector<int> labels;
    int k = 0;

    std::int64_t size() const { return features.rank() == 2 ? features.dim(0) : 0; }

    void validate() const {
        if (features.rank() != 2 || features.dim(0) < 1)
            throw InvalidInput("training set is empty");
        if (features.dim(0) != static_cast<std::int64_t>(labels.size()))
            throw InvalidInput("training set: feature/label count mismatch");
        if (k < 2) throw InvalidInput("training set: need at least 2 known families");
        for (int y : labels)
            if (y < 0 || y >= k) throw InvalidInput("training set: label outside known families");
    }
};

template <class T>
struct OptimizerTriple {
    AdamState<T> disc;
    AdamState<T> gen;
    AdamState<T> clf;

    static OptimizerTriple for_model(const ModelTriple<T>& m) {
        return OptimizerTriple{AdamState<T>::for_params(m.discriminator.params),
                               AdamState<T>::for_params(m.generator.params),
                               AdamState<T>::for_params(m.classifier.params)};
    }
};

namespace detail {

template <class T>
Tensor<T> gather_rows(const Tensor<T>& src, const std::vector<std::int64_t>& order,
                      std::size_t first, std::size_t count) {
    const std::int64_t d = src.dim(1);
    Tensor<T> out({static_cast<std::int64_t>(count), d});
    for (std::size_t r = 0; r < count; ++r) {
        const auto row = src.row(order[first + r]);
        std::copy(row.begin(), row.end(), out.row(static_cast<std::int64_t>(r)).begin());
    }
    return out;
}

template <class T>
std::vector<Tensor<T>> collect_grads(const Tape<T>& tape, const BoundNet<T>& bound) {
    std::vector<Tensor<T>> grads;
    grads.reserve(bound.param_ids.size());
    for (auto id : bound.param_ids) grads.push_back(tape.grad(id));
    return grads;
}

} // namespace detail

// Plain argmax accuracy of the classifier over a labeled set (the per-round
// telemetry column; thresholding plays no role here).
template <class T>
double argmax_accuracy(const ModelTriple<T>& model, const TrainingSet<T>& set) {
    const Tensor<T> probs = classifier_probabilities(model, set.features);
    std::int64_t correct = 0;
    for (std::int64_t i = 0; i < probs.dim(0); ++i)
        if (static_cast<int>(argmax(probs.row(i))) == set.labels[static_cast<std::size_t>(i)])
            ++correct;
    return static_cast<double>(correct) / static_cast<double>(probs.dim(0));
}

// One full shuffled pass over the training set. Per mini-batch the three
// updates run in order — discriminator, generator, classifier — each drawing
// a fresh latent batch and touching exactly its own parameter set.
template <class T>
RoundRecord train_round(ModelTriple<T>& model, OptimizerTriple<T>& opt,
                        const TrainingSet<T>& train, const TrainConfig& config, Rng& shuffle_rng,
                        Rng& latent_rng) {
    train.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const std::int64_t n = train.size();
    const LossWeights w = config.effective_weights();

    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng.shuffle(order.begin(), order.end());

    RoundRecord rec;
    double sum_d = 0.0, sum_g = 0.0, sum_p = 0.0, instances = 0.0;
    for (std::int64_t start = 0; start < n; start += config.batch_size) {
        const auto b = static_cast<std::size_t>(std::min<std::int64_t>(config.batch_size, n - start));
        Tensor<T> real = detail::gather_rows(train.features, order, static_cast<std::size_t>(start), b);
        std::vector<int> labels(b);
        for (std::size_t i = 0; i < b; ++i)
            labels[i] = train.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(start) + i])];

        double loss_d = 0.0, loss_g = 0.0;
        const Tensor<T>* fake_for_clf = nullptr;
        Tensor<T> fake_p;
        if (config.enable_synthesizer) {
            const auto bi = static_cast<std::int64_t>(b);
            {
                Tensor<T> z = sample_latent<T>(bi, config.arch.latent_dim, latent_rng);
                Tensor<T> fake = generator_forward(model, z);
                Tape<T> tape;
                auto step = build_discriminator_loss(tape, model, real, fake);
                tape.backward(step.loss);
                auto grads = detail::collect_grads(tape, step.disc);
                adam_step(model.discriminator.params, grads, opt.disc, config.learning_rate);
                loss_d = static_cast<double>(tape.value(step.loss)[0]);
            }
            {
                Tensor<T> z = sample_latent<T>(bi, config.arch.latent_dim, latent_rng);
                Tape<T> tape;
                auto step =
                    build_generator_loss(tape, model, z, w, config.non_saturating_generator);
                tape.backward(step.loss);
                auto grads = detail::collect_grads(tape, step.gen);
                adam_step(model.generator.params, grads, opt.gen, config.learning_rate);
                loss_g = static_cast<double>(tape.value(step.loss)[0]);
            }
            Tensor<T> z = sample_latent<T>(bi, config.arch.latent_dim, latent_rng);
            fake_p = generator_forward(model, z);
            fake_for_clf = &fake_p;
        }

        const GHotMask mask = build_ghot(labels, model.k);
        Tape<T> tape;
        auto step = build_classifier_loss(tape, model, real, labels, fake_for_clf,
                                          fake_for_clf ? &mask : nullptr, w);
        tape.backward(step.loss);
        auto grads = detail::collect_grads(tape, step.clf);
        adam_step(model.classifier.params, grads, opt.clf, config.learning_rate);
        const double loss_p = static_cast<double>(tape.value(step.loss)[0]);

        if (!(std::isfinite(loss_d) && std::isfinite(loss_g) && std::isfinite(loss_p)))
            throw ContractViolation("train_round: non-finite loss recorded");
        const double bw = static_cast<double>(b);
        sum_d += loss_d * bw;
        sum_g += loss_g * bw;
        sum_p += loss_p * bw;
        instances += bw;
    }
    rec.loss_d = sum_d / instances;
    rec.loss_g = sum_g / instances;
    rec.loss_p = sum_p / instances;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

template <class T>
struct TrainResult {
    ModelTriple<T> model;
    TrainTrace trace;
};

// The cooperative loop: a fixed budget of rounds (no convergence test), one
// trace record per round, optional checkpoint hook every
// config.checkpoint_every rounds.
template <class T>
TrainResult<T> cooperative_train(
    const TrainingSet<T>& train, const TrainConfig& config,
    const TrainingSet<T>* known_test = nullptr,
    const std::function<void(int, const ModelTriple<T>&)>& checkpoint_hook = {}) {
    config.validate();
    train.validate();

    Rng master(config.seed);
    const std::uint64_t init_seed = master.next_u64();
    Rng shuffle_rng = master.fork(1);
    Rng latent_rng = master.fork(2);

    TrainResult<T> result;
    result.model = init_model<T>(config.arch, train.k, init_seed);
    auto opt = OptimizerTriple<T>::for_model(result.model);
    result.trace.reserve(static_cast<std::size_t>(config.rounds));
    for (int round = 1; round <= config.rounds; ++round) {
        RoundRecord rec = train_round(result.model, opt, train, config, shuffle_rng, latent_rng);
        rec.round = round;
        if (known_test) rec.test_acc = argmax_accuracy(result.model, *known_test);
        result.trace.push_back(rec);
        if (checkpoint_hook && round % config.checkpoint_every == 0)
            checkpoint_hook(round, result.model);
    }
    return result;
}

inline void write_trace_csv(std::ostream& out, const TrainTrace& trace,
                            const std::string& config_digest = {}) {
    if (!config_digest.empty()) out << "# config_digest=" << config_digest << "\n";
    out << "round,loss_d,loss_g,loss_p,test_acc,seconds\n";
    out << std::setprecision(9);
    for (const auto& r : trace)
        out << r.round << ',' << r.loss_d << ',' << r.loss_g << ',' << r.loss_p << ','
            << r.test_acc << ',' << r.seconds << "\n";
}

} // namespace cnsnet
