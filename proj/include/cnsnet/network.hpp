#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cnsnet/rng.hpp"
#include "cnsnet/tape.hpp"
#include "cnsnet/tensor.hpp"

namespace cnsnet {

enum class ArchVariant { dense, conv };
enum class Activation { none, relu, sigmoid, sigmoid_clamped };

// Architecture knobs for the model triple. The dense variant is the
// desk-scale default; the conv variant instantiates the 13-layer
// classifier stack (3x3 kernels, stride 1, pad 1, 2x2 max-pool after each
// block) plus 4-conv-layer generator/discriminator over the image view.
struct ArchitectureConfig {
    ArchVariant variant = ArchVariant::dense;
    std::vector<int> classifier_hidden = {512, 256};
    std::vector<int> generator_hidden = {128, 256};
    std::vector<int> discriminator_hidden = {256, 128};
    int latent_dim = 64;
    std::int64_t feature_dim = 625;
    std::int64_t image_height = 25; // conv variant only; height*width == feature_dim
    std::int64_t image_width = 25;
    Activation hidden_activation = Activation::relu;

    bool operator==(const ArchitectureConfig&) const = default;
};

inline const char* to_string(ArchVariant v) { return v == ArchVariant::dense ? "dense" : "conv"; }

inline ArchVariant arch_variant_from(const std::string& s) {
    if (s == "dense") return ArchVariant::dense;
    if (s == "conv") return ArchVariant::conv;
    throw InvalidConfig("unknown architecture variant '" + s + "'");
}

// One step of a network plan. Dense and conv layers own two parameter
// tensors (weight, bias); the rest are shape plumbing.
struct LayerSpec {
    enum class Kind { dense, conv, pool, to_image, flatten } kind = Kind::dense;
    Activation activation = Activation::none;
    // dense
    std::int64_t in = 0, out = 0;
    // conv / pool geometry (NCHW)
    std::int64_t in_c = 0, out_c = 0, kernel = 0, stride = 1, pad = 0;
    std::int64_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
};

template <class T>
struct Network {
    std::vector<LayerSpec> plan;
    std::vector<Tensor<T>> params; // weight, bias per parameterized layer, in plan order
    std::int64_t input_dim = 0;
    std::int64_t output_dim = 0;

    std::int64_t param_count() const {
        std::int64_t n = 0;
        for (const auto& p : params) n += p.numel();
        return n;
    }
};

// The three parameter sets trained cooperatively.
template <class T>
struct ModelTriple {
    ArchitectureConfig config;
    int k = 0; // known family count = classifier output width
    Network<T> classifier;
    Network<T> generator;
    Network<T> discriminator;
};

namespace detail {

inline LayerSpec dense_layer(std::int64_t in, std::int64_t out, Activation act) {
    LayerSpec l;
    l.kind = LayerSpec::Kind::dense;
    l.in = in;
    l.out = out;
    l.activation = act;
    return l;
}

inline LayerSpec conv_layer(std::int64_t in_c, std::int64_t out_c, std::int64_t in_h,
                            std::int64_t in_w, Activation act) {
    LayerSpec l;
    l.kind = LayerSpec::Kind::conv;
    l.in_c = in_c;
    l.out_c = out_c;
    l.kernel = 3;
    l.stride = 1;
    l.pad = 1;
    l.in_h = in_h;
    l.in_w = in_w;
    l.out_h = in_h; // 3x3, stride 1, pad 1 preserves the grid
    l.out_w = in_w;
    l.activation = act;
    return l;
}

inline LayerSpec pool_layer(std::int64_t c, std::int64_t in_h, std::int64_t in_w) {
    LayerSpec l;
    l.kind = LayerSpec::Kind::pool;
    l.in_c = l.out_c = c;
    l.in_h = in_h;
    l.in_w = in_w;
    l.out_h = in_h / 2;
    l.out_w = in_w / 2;
    return l;
}

inline LayerSpec to_image_layer(std::int64_t c, std::int64_t h, std::int64_t w) {
    LayerSpec l;
    l.kind = LayerSpec::Kind::to_image;
    l.in_c = l.out_c = c;
    l.in_h = l.out_h = h;
    l.in_w = l.out_w = w;
    return l;
}

inline LayerSpec flatten_layer(std::int64_t c, std::int64_t h, std::int64_t w) {
    LayerSpec l;
    l.kind = LayerSpec::Kind::flatten;
    l.in_c = l.out_c = c;
    l.in_h = l.out_h = h;
    l.in_w = l.out_w = w;
    l.out = c * h * w;
    return l;
}

inline std::vector<LayerSpec> dense_stack(std::int64_t in, const std::vector<int>& hidden,
                                          std::int64_t out, Activation hidden_act,
                                          Activation final_act) {
    std::vector<LayerSpec> plan;
    std::int64_t cur = in;
    for (int h : hidden) {
        if (h <= 0) throw InvalidConfig("hidden layer width must be positive");
        plan.push_back(dense_layer(cur, h, hidden_act));
        cur = h;
    }
    plan.push_back(dense_layer(cur, out, final_act));
    return plan;
}

// Table-style classifier stack: channel plan 32,32,64,64 | 64,128,128 |
// 128,256,256 | 256,512,512 with a 2x2 max-pool closing each block, then a
// single 512-wide fully connected hidden layer.
inline std::vector<LayerSpec> conv_classifier_plan(std::int64_t h, std::int64_t w, std::int64_t k,
                                                   Activation act) {
    static constexpr int kBlocks[4][4] = {
        {32, 32, 64, 64}, {64, 128, 128, 0}, {128, 256, 256, 0}, {256, 512, 512, 0}};
    std::vector<LayerSpec> plan;
    plan.push_back(to_image_layer(1, h, w));
    std::int64_t c = 1, ch = h, cw = w;
    for (const auto& block : kBlocks) {
        for (int oc : block) {
            if (oc == 0) break;
            plan.push_back(conv_layer(c, oc, ch, cw, act));
            c = oc;
        }
        // 25x25 input pools after every block (25->12->6->3->1); smaller
        // images skip pools that would collapse the grid
        if (ch / 2 >= 1 && cw / 2 >= 1) {
            plan.push_back(pool_layer(c, ch, cw));
            ch /= 2;
            cw /= 2;
        }
    }
    plan.push_back(flatten_layer(c, ch, cw));
    plan.push_back(dense_layer(c * ch * cw, 512, act));
    plan.push_back(dense_layer(512, k, Activation::none));
    return plan;
}

inline std::vector<LayerSpec> conv_generator_plan(std::int64_t latent, std::int64_t h,
                                                  std::int64_t w, Activation act) {
    std::vector<LayerSpec> plan;
    plan.push_back(dense_layer(latent, 4 * h * w, act));
    plan.push_back(to_image_layer(4, h, w));
    plan.push_back(conv_layer(4, 32, h, w, act));
    plan.push_back(conv_layer(32, 32, h, w, act));
    plan.push_back(conv_layer(32, 16, h, w, act));
    plan.push_back(conv_layer(16, 1, h, w, Activation::sigmoid));
    plan.push_back(flatten_layer(1, h, w));
    return plan;
}

inline std::vector<LayerSpec> conv_discriminator_plan(std::int64_t h, std::int64_t w,
                                                      Activation act) {
    std::vector<LayerSpec> plan;
    plan.push_back(to_image_layer(1, h, w));
    std::int64_t c = 1, ch = h, cw = w;
    const int channels[4] = {32, 64, 128, 128};
    for (int i = 0; i < 4; ++i) {
        plan.push_back(conv_layer(c, channels[i], ch, cw, act));
        c = channels[i];
        // pool between conv layers while the grid can still halve
        if (i < 3 && ch / 2 >= 1 && cw / 2 >= 1) {
            plan.push_back(pool_layer(c, ch, cw));
            ch /= 2;
            cw /= 2;
        }
    }
    plan.push_back(flatten_layer(c, ch, cw));
    plan.push_back(dense_layer(c * ch * cw, 1, Activation::sigmoid_clamped));
    return plan;
}

template <class T>
void init_params(Network<T>& net, Rng& rng) {
    net.params.clear();
    for (const auto& layer : net.plan) {
        std::int64_t fan_in = 0, fan_out = 0;
        Shape wshape, bshape;
        if (layer.kind == LayerSpec::Kind::dense) {
            fan_in = layer.in;
            fan_out = layer.out;
            wshape = {layer.in, layer.out};
            bshape = {layer.out};
        } else if (layer.kind == LayerSpec::Kind::conv) {
            fan_in = layer.in_c * layer.kernel * layer.kernel;
            fan_out = layer.out_c * layer.kernel * layer.kernel;
            wshape = {layer.out_c, layer.in_c, layer.kernel, layer.kernel};
            bshape = {layer.out_c};
        } else {
            continue;
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Tensor<T> w(wshape);
        for (std::int64_t i = 0; i < w.numel(); ++i)
            w[i] = static_cast<T>(rng.uniform(-bound, bound));
        net.params.push_back(std::move(w));
        net.params.emplace_back(bshape); // biases start at zero
    }
}

} // namespace detail

template <class T>
Network<T> make_network(std::vector<LayerSpec> plan, std::int64_t input_dim,
                        std::int64_t output_dim, Rng& rng) {
    Network<T> net;
    net.plan = std::move(plan);
    net.input_dim = input_dim;
    net.output_dim = output_dim;
    detail::init_params(net, rng);
    return net;
}

// Builds the model triple with Glorot-uniform weights and zero biases,
// bit-reproducible for a given (config, k, seed).
template <class T>
ModelTriple<T> init_model(const ArchitectureConfig& config, int k, std::uint64_t seed) {
    if (k < 2) throw InvalidConfig("init_model: need at least 2 known families");
    if (config.feature_dim <= 0) throw InvalidConfig("init_model: feature dimension must be positive");
    if (config.latent_dim <= 0) throw InvalidConfig("init_model: latent dimension must be positive");
    if (config.variant == ArchVariant::conv &&
        config.image_height * config.image_width != config.feature_dim)
        throw InvalidConfig("init_model: conv variant needs image_height*image_width == feature_dim");

    const Activation act = config.hidden_activation;
    Rng rng(seed);
    ModelTriple<T> m;
    m.config = config;
    m.k = k;
    if (config.variant == ArchVariant::dense) {
        m.classifier = make_network<T>(
            detail::dense_stack(config.feature_dim, config.classifier_hidden, k, act,
                                Activation::none),
            config.feature_dim, k, rng);
        m.generator = make_network<T>(
            detail::dense_stack(config.latent_dim, config.generator_hidden, config.feature_dim, act,
                                Activation::sigmoid),
            config.latent_dim, config.feature_dim, rng);
        m.discriminator = make_network<T>(
            detail::dense_stack(config.feature_dim, config.discriminator_hidden, 1, act,
                                Activation::sigmoid_clamped),
            config.feature_dim, 1, rng);
    } else {
        m.classifier = make_network<T>(
            detail::conv_classifier_plan(config.image_height, config.image_width, k, act),
            config.feature_dim, k, rng);
        m.generator = make_network<T>(
            detail::conv_generator_plan(config.latent_dim, config.image_height, config.image_width,
                                        act),
            config.latent_dim, config.feature_dim, rng);
        m.discriminator = make_network<T>(
            detail::conv_discriminator_plan(config.image_height, config.image_width, act),
            config.feature_dim, 1, rng);
    }
    return m;
}

// Parameter nodes of one network registered on a tape. Trainable networks
// register leaves (gradients tracked); frozen networks register constants, so
// gradients cannot leak into them by construction.
template <class T>
struct BoundNet {
    std::vector<typename Tape<T>::Id> param_ids;
};

template <class T>
BoundNet<T> bind(Tape<T>& tape, const Network<T>& net, bool trainable) {
    BoundNet<T> bound;
    bound.param_ids.reserve(net.params.size());
    for (const auto& p : net.params)
        bound.param_ids.push_back(trainable ? tape.leaf(p) : tape.constant(p));
    return bound;
}

// Replays the plan on the tape. Input must be [batch, input_dim].
template <class T>
typename Tape<T>::Id forward(Tape<T>& tape, const Network<T>& net, const BoundNet<T>& bound,
                             typename Tape<T>::Id input) {
    const Tensor<T>& in = tape.value(input);
    if (in.rank() != 2 || in.dim(1) != net.input_dim)
        throw InvalidInput("network forward: expected [batch, " + std::to_string(net.input_dim) +
                           "] input, got " + shape_str(in.shape()));
    const std::int64_t batch = in.dim(0);
    typename Tape<T>::Id cur = input;
    std::size_t pi = 0;
    for (const auto& layer : net.plan) {
        switch (layer.kind) {
        case LayerSpec::Kind::dense:
            cur = tape.add_bias(tape.matmul(cur, bound.param_ids[pi]), bound.param_ids[pi + 1]);
            pi += 2;
            break;
        case LayerSpec::Kind::conv:
            cur = tape.conv2d(cur, bound.param_ids[pi], bound.param_ids[pi + 1],
                              static_cast<int>(layer.stride), static_cast<int>(layer.pad));
            pi += 2;
            break;
        case LayerSpec::Kind::pool:
            cur = tape.maxpool2(cur);
            break;
        case LayerSpec::Kind::to_image:
            cur = tape.reshape(cur, {batch, layer.in_c, layer.in_h, layer.in_w});
            break;
        case LayerSpec::Kind::flatten:
            cur = tape.reshape(cur, {batch, layer.out});
            break;
        }
        switch (layer.activation) {
        case Activation::none:
            break;
        case Activation::relu:
            cur = tape.relu(cur);
            break;
        case Activation::sigmoid:
            cur = tape.sigmoid(cur);
            break;
        case Activation::sigmoid_clamped:
            cur = tape.clamp(tape.sigmoid(cur), static_cast<T>(1e-7), static_cast<T>(1.0 - 1e-7));
            break;
        }
    }
    const Tensor<T>& out = tape.value(cur);
    if (out.rank() != 2 || out.dim(0) != batch || out.dim(1) != net.output_dim)
        throw ContractViolation("network forward: output shape " + shape_str(out.shape()) +
                                " violates the plan");
    if (!out.all_finite()) throw ContractViolation("network forward: non-finite output");
    return cur;
}

// ---- value-level forwards (inference path) --------------------------------

template <class T>
Tensor<T> network_forward(const Network<T>& net, const Tensor<T>& input) {
    Tape<T> tape;
    auto bound = bind(tape, net, false);
    return tape.value(forward(tape, net, bound, tape.constant(input)));
}

// Logits for a batch of instances; probabilities come from softmax on top.
template <class T>
Tensor<T> classifier_forward(const ModelTriple<T>& model, const Tensor<T>& batch) {
    return network_forward(model.classifier, batch);
}

template <class T>
Tensor<T> classifier_probabilities(const ModelTriple<T>& model, const Tensor<T>& batch) {
    return softmax(classifier_forward(model, batch));
}

// Synthesized batch for a latent batch; every value inside [0,1].
template <class T>
Tensor<T> generator_forward(const ModelTriple<T>& model, const Tensor<T>& z) {
    return network_forward(model.generator, z);
}

// Realness score per instance, strictly inside (0,1).
template <class T>
Tensor<T> discriminator_forward(const ModelTriple<T>& model, const Tensor<T>& x) {
    Tensor<T> out = network_forward(model.discriminator, x);
    return out.reshaped({out.dim(0)});
}

// i.i.d. standard-normal latent draws, [count, dim].
template <class T>
Tensor<T> sample_latent(std::int64_t count, std::int64_t dim, Rng& rng) {
    if (count < 1) throw InvalidInput("sample_latent: count must be >= 1");
    if (dim < 1) throw InvalidInput("sample_latent: dim must be >= 1");
    Tensor<T> z({count, dim});
    for (std::int64_t i = 0; i < z.numel(); ++i) z[i] = static_cast<T>(rng.normal());
    return z;
}

} // namespace cnsnet
