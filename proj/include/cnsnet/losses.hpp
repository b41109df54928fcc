#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cnsnet/network.hpp"
#include "cnsnet/tape.hpp"

namespace cnsnet {

// Weights of the two rectification regularizers: beta scales the
// flatten-to-uniform pull, gamma the batch-local known-family exclusion.
struct LossWeights {
    double beta = 1.0;
    double gamma = 1.0;

    void validate() const {
        if (!(std::isfinite(beta) && beta >= 0.0 && std::isfinite(gamma) && gamma >= 0.0))
            throw InvalidInput("loss weights must be finite and non-negative");
    }
};

// OR of the one-hot vectors of the families present in one real mini-batch.
struct GHotMask {
    std::vector<std::uint8_t> bits;
    int g = 0; // number of distinct families in the batch
};

inline GHotMask build_ghot(const std::vector<int>& batch_labels, int k) {
    GHotMask mask;
    mask.bits.assign(static_cast<std::size_t>(k), 0);
    for (int y : batch_labels) {
        if (y < 0 || y >= k)
            throw InvalidInput("build_ghot: label " + std::to_string(y) + " outside [0, " +
                               std::to_string(k) + ")");
        if (!mask.bits[static_cast<std::size_t>(y)]) {
            mask.bits[static_cast<std::size_t>(y)] = 1;
            ++mask.g;
        }
    }
    return mask;
}

// ---- loss graphs -----------------------------------------------------------
//
// Each build_* records one training step's loss on the caller's tape. Only the
// stepped network is bound as trainable; the other two enter as constants (or
// as precomputed constant batches), so gradients cannot reach them.

template <class T>
struct DiscriminatorStep {
    typename Tape<T>::Id loss;
    BoundNet<T> disc;
};

// L_D = -( mean log D(x) + mean log(1 - D(x')) ): descending this maximizes
// the discriminator's objective (the non-negated form would minimize it).
template <class T>
DiscriminatorStep<T> build_discriminator_loss(Tape<T>& tape, const ModelTriple<T>& model,
                                              const Tensor<T>& real, const Tensor<T>& fake) {
    if (real.rank() != 2 || fake.rank() != 2 || real.dim(0) != fake.dim(0) || real.dim(0) < 1)
        throw InvalidInput("discriminator_loss: real/fake batch sizes must match and be >= 1");
    DiscriminatorStep<T> step;
    step.disc = bind(tape, model.discriminator, true);
    auto d_real = forward(tape, model.discriminator, step.disc, tape.constant(real));
    auto d_fake = forward(tape, model.discriminator, step.disc, tape.constant(fake));
    step.loss = tape.scale(tape.add(tape.mean_log(d_real), tape.mean_log_one_minus(d_fake)), T(-1));
    return step;
}

template <class T>
struct GeneratorStep {
    typename Tape<T>::Id loss;
    typename Tape<T>::Id gan_term;
    typename Tape<T>::Id kl_term = -1; // absent when beta == 0
    BoundNet<T> gen;
};

// L_G = mean log(1 - D(G(z))) + beta * mean D_KL(U || P(. | G(z))).
// The saturating first term follows the written objective; the
// non-saturating -mean log D(G(z)) swap sits behind a flag, default off.
template <class T>
GeneratorStep<T> build_generator_loss(Tape<T>& tape, const ModelTriple<T>& model,
                                      const Tensor<T>& z, const LossWeights& weights,
                                      bool non_saturating = false) {
    weights.validate();
    if (z.rank() != 2 || z.dim(0) < 1) throw InvalidInput("generator_loss: latent batch must be [b>=1, latent]");
    GeneratorStep<T> step;
    step.gen = bind(tape, model.generator, true);
    auto d_bound = bind(tape, model.discriminator, false);
    auto fake = forward(tape, model.generator, step.gen, tape.constant(z));
    auto d_fake = forward(tape, model.discriminator, d_bound, fake);
    step.gan_term = non_saturating ? tape.scale(tape.mean_log(d_fake), T(-1))
                                   : tape.mean_log_one_minus(d_fake);
    step.loss = step.gan_term;
    if (weights.beta > 0.0) {
        auto c_bound = bind(tape, model.classifier, false);
        auto logits = forward(tape, model.classifier, c_bound, fake);
        step.kl_term = tape.mean_kl_uniform(tape.softmax_rows(logits));
        step.loss = tape.add(step.gan_term, tape.scale(step.kl_term, static_cast<T>(weights.beta)));
    }
    return step;
}

template <class T>
struct ClassifierStep {
    typename Tape<T>::Id loss;
    typename Tape<T>::Id ce_term;
    typename Tape<T>::Id kl_term = -1;
    typename Tape<T>::Id excl_term = -1;
    BoundNet<T> clf;
};

// L_P = mean CE(real) + beta * mean D_KL(U || P(. | x')) + (gamma/b) * sum_i
// ||V_ghot (.) P(. | x'_i)||_2. Fakes arrive as a precomputed constant batch,
// so no gradient flows toward the generator.
template <class T>
ClassifierStep<T> build_classifier_loss(Tape<T>& tape, const ModelTriple<T>& model,
                                        const Tensor<T>& real, const std::vector<int>& labels,
                                        const Tensor<T>* fake, const GHotMask* mask,
                                        const LossWeights& weights) {
    weights.validate();
    if (real.rank() != 2 || real.dim(0) < 1 ||
        real.dim(0) != static_cast<std::int64_t>(labels.size()))
        throw InvalidInput("classifier_loss: real batch and label count must match and be >= 1");
    for (int y : labels)
        if (y < 0 || y >= model.k)
            throw InvalidInput("classifier_loss: label outside known families");
    ClassifierStep<T> step;
    step.clf = bind(tape, model.classifier, true);
    auto real_probs =
        tape.softmax_rows(forward(tape, model.classifier, step.clf, tape.constant(real)));
    step.ce_term = tape.mean_cross_entropy(real_probs, labels);
    step.loss = step.ce_term;
    if (fake) {
        if (fake->dim(0) != real.dim(0))
            throw InvalidInput("classifier_loss: synthesized batch size must equal the real one");
        const double b = static_cast<double>(real.dim(0));
        auto fake_probs =
            tape.softmax_rows(forward(tape, model.classifier, step.clf, tape.constant(*fake)));
        if (weights.beta > 0.0) {
            step.kl_term = tape.mean_kl_uniform(fake_probs);
            step.loss =
                tape.add(step.loss, tape.scale(step.kl_term, static_cast<T>(weights.beta)));
        }
        if (weights.gamma > 0.0) {
            if (!mask) throw InvalidInput("classifier_loss: exclusion term needs a g-hot mask");
            if (static_cast<std::int64_t>(mask->bits.size()) != model.k)
                throw InvalidInput("classifier_loss: g-hot mask width must equal k");
            step.excl_term = tape.masked_l2_sum(fake_probs, mask->bits);
            step.loss = tape.add(
                step.loss, tape.scale(step.excl_term, static_cast<T>(weights.gamma / b)));
        }
    }
    return step;
}

// ---- value-level wrappers ---------------------------------------------------

template <class T>
double discriminator_loss(const ModelTriple<T>& model, const Tensor<T>& real,
                          const Tensor<T>& fake) {
    Tape<T> tape;
    return static_cast<double>(tape.value(build_discriminator_loss(tape, model, real, fake).loss)[0]);
}

template <class T>
double generator_loss(const ModelTriple<T>& model, const Tensor<T>& z, const LossWeights& weights,
                      bool non_saturating = false) {
    Tape<T> tape;
    return static_cast<double>(
        tape.value(build_generator_loss(tape, model, z, weights, non_saturating).loss)[0]);
}

template <class T>
double classifier_loss(const ModelTriple<T>& model, const Tensor<T>& real,
                       const std::vector<int>& labels, const Tensor<T>* fake, const GHotMask* mask,
                       const LossWeights& weights) {
    Tape<T> tape;
    return static_cast<double>(
        tape.value(build_classifier_loss(tape, model, real, labels, fake, mask, weights).loss)[0]);
}

} // namespace cnsnet
