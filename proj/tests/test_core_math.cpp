#include <catch2/catch_amalgamated.hpp>

#include "cnsnet/adam.hpp"
#include "cnsnet/ops.hpp"
#include "cnsnet/tape.hpp"

#include "test_support.hpp"

using namespace cnsnet;
using Catch::Approx;

namespace {

template <class T>
std::span<const T> span_of(const std::vector<T>& v) {
    return std::span<const T>(v);
}

} // namespace

TEST_CASE("softmax: equal logits give the uniform distribution") {
    Tensor<double> logits({1, 4}, {0.0, 0.0, 0.0, 0.0});
    const auto probs = softmax(logits);
    for (std::int64_t j = 0; j < 4; ++j) REQUIRE(probs.at(0, j) == Approx(0.25).margin(1e-12));
}

TEST_CASE("softmax: shift invariance") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t k = 2 + static_cast<std::int64_t>(rng.below(6));
        Tensor<double> a({1, k});
        for (std::int64_t j = 0; j < k; ++j) a.at(0, j) = rng.uniform(-5.0, 5.0);
        const double c = rng.uniform(-30.0, 30.0);
        Tensor<double> b = a;
        for (std::int64_t j = 0; j < k; ++j) b.at(0, j) += c;
        const auto pa = softmax(a), pb = softmax(b);
        for (std::int64_t j = 0; j < k; ++j)
            REQUIRE(pa.at(0, j) == Approx(pb.at(0, j)).margin(1e-9));
    }
}

TEST_CASE("softmax: frozen oracle values for [1,2,3]") {
    const auto probs = softmax(Tensor<double>({1, 3}, {1.0, 2.0, 3.0}));
    REQUIRE(probs.at(0, 0) == Approx(0.09003057317038046).margin(1e-5));
    REQUIRE(probs.at(0, 1) == Approx(0.24472847105479764).margin(1e-5));
    REQUIRE(probs.at(0, 2) == Approx(0.66524095577482190).margin(1e-5));
}

TEST_CASE("softmax: rows sum to one for random finite logits") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::int64_t k = 2 + static_cast<std::int64_t>(rng.below(12));
        Tensor<float> logits({3, k});
        for (std::int64_t i = 0; i < logits.numel(); ++i)
            logits[i] = static_cast<float>(rng.uniform(-40.0, 40.0));
        const auto probs = softmax(logits);
        for (std::int64_t r = 0; r < 3; ++r) {
            double sum = 0.0;
            for (std::int64_t j = 0; j < k; ++j) sum += probs.at(r, j);
            REQUIRE(sum == Approx(1.0).margin(1e-6));
            REQUIRE(is_distribution<float>(probs.row(r)));
        }
        // order of probabilities preserves order of logits
        for (std::int64_t j = 1; j < k; ++j)
            REQUIRE((logits.at(0, j) >= logits.at(0, j - 1)) ==
                    (probs.at(0, j) >= probs.at(0, j - 1)));
    }
}

TEST_CASE("softmax rejects non-finite input") {
    Tensor<double> logits({1, 2}, {1.0, std::numeric_limits<double>::infinity()});
    REQUIRE_THROWS_AS(softmax(logits), InvalidInput);
}

TEST_CASE("cross_entropy: uniform prediction costs ln k") {
    const std::vector<double> pred(4, 0.25);
    const std::vector<double> onehot{0.0, 0.0, 1.0, 0.0};
    REQUIRE(cross_entropy(span_of(pred), span_of(onehot)) == Approx(std::log(4.0)).margin(1e-12));
}

TEST_CASE("cross_entropy: exact prediction costs nothing") {
    const std::vector<double> pred{0.0, 1.0, 0.0};
    const std::vector<double> onehot{0.0, 1.0, 0.0};
    REQUIRE(cross_entropy(span_of(pred), span_of(onehot)) <= 1e-7);
}

TEST_CASE("cross_entropy: frozen oracle value") {
    const std::vector<double> pred{0.7, 0.2, 0.1};
    const std::vector<double> onehot{0.0, 1.0, 0.0};
    REQUIRE(cross_entropy(span_of(pred), span_of(onehot)) ==
            Approx(1.6094379124341003).margin(1e-9));
}

TEST_CASE("cross_entropy rejects malformed one-hot targets") {
    const std::vector<double> pred{0.5, 0.5};
    const std::vector<double> two_ones{1.0, 1.0};
    const std::vector<double> no_ones{0.0, 0.0};
    const std::vector<double> fractional{0.5, 0.5};
    REQUIRE_THROWS_AS(cross_entropy(span_of(pred), span_of(two_ones)), InvalidInput);
    REQUIRE_THROWS_AS(cross_entropy(span_of(pred), span_of(no_ones)), InvalidInput);
    REQUIRE_THROWS_AS(cross_entropy(span_of(pred), span_of(fractional)), InvalidInput);
}

TEST_CASE("cross_entropy is non-negative and zero only at the target") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + rng.below(8);
        const auto pred = oracle::random_distribution(rng, k);
        std::vector<double> onehot(k, 0.0);
        onehot[rng.below(k)] = 1.0;
        const double ce = cross_entropy(span_of(pred), span_of(onehot));
        REQUIRE(ce >= 0.0);
    }
}

TEST_CASE("kl_to_uniform: vanishes exactly on uniform input") {
    for (std::size_t k : {2, 3, 7, 16}) {
        const std::vector<double> pred(k, 1.0 / static_cast<double>(k));
        REQUIRE(kl_to_uniform(span_of(pred)) == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("kl_to_uniform: frozen oracle values") {
    // computed with the independent high-precision oracle using the same
    // clamp; includes the saturated [0.5,0.5,0,0] case
    const std::vector<double> saturated{0.5, 0.5, 0.0, 0.0};
    REQUIRE(kl_to_uniform(span_of(saturated)) == Approx(8.170619601136265).margin(1e-6));
    const std::vector<double> sloped{0.4, 0.3, 0.2, 0.1};
    REQUIRE(kl_to_uniform(span_of(sloped)) == Approx(0.12177727428716865).margin(1e-9));
}

TEST_CASE("kl_to_uniform rejects k < 2") {
    const std::vector<double> pred{1.0};
    REQUIRE_THROWS_AS(kl_to_uniform(span_of(pred)), InvalidInput);
}

TEST_CASE("kl_to_uniform: non-negative, zero iff uniform within clamp") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + rng.below(10);
        const auto pred = oracle::random_distribution(rng, k);
        const double kl = kl_to_uniform(span_of(pred));
        REQUIRE(kl >= -1e-12);
        double max_dev = 0.0;
        for (double p : pred) max_dev = std::max(max_dev, std::abs(p - 1.0 / static_cast<double>(k)));
        if (kl <= 1e-9) REQUIRE(max_dev <= 1e-4);
    }
}

TEST_CASE("masked_l2: zero mask and frozen values") {
    const std::vector<double> any{0.9, 0.05, 0.03, 0.02};
    const std::vector<std::uint8_t> zero(4, 0);
    REQUIRE(masked_l2(span_of(any), span_of(zero)) == 0.0);

    const std::vector<double> uniform(4, 0.25);
    const std::vector<std::uint8_t> half{1, 1, 0, 0};
    REQUIRE(masked_l2(span_of(uniform), span_of(half)) ==
            Approx(0.3535533905932738).margin(1e-9));

    const std::vector<double> sloped{0.6, 0.1, 0.2, 0.1};
    const std::vector<std::uint8_t> alternating{1, 0, 1, 0};
    REQUIRE(masked_l2(span_of(sloped), span_of(alternating)) ==
            Approx(0.6324555320336759).margin(1e-9));
}

TEST_CASE("masked_l2: mask length mismatch and bad mask entries") {
    const std::vector<double> pred{0.5, 0.5};
    const std::vector<std::uint8_t> wrong{1};
    REQUIRE_THROWS_AS(masked_l2(span_of(pred), span_of(wrong)), InvalidInput);
    const std::vector<std::uint8_t> bad{1, 2};
    REQUIRE_THROWS_AS(masked_l2(span_of(pred), span_of(bad)), InvalidInput);
}

TEST_CASE("masked_l2 never exceeds the unmasked norm") {
    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + rng.below(10);
        const auto pred = oracle::random_distribution(rng, k);
        std::vector<std::uint8_t> mask(k), all(k, 1);
        for (auto& b : mask) b = static_cast<std::uint8_t>(rng.below(2));
        REQUIRE(masked_l2(span_of(pred), span_of(mask)) <=
                masked_l2(span_of(pred), span_of(all)) + 1e-12);
    }
}

// ---- tape ------------------------------------------------------------------

TEST_CASE("tape: constant loss has zero gradients") {
    Tape<double> tape;
    auto w = tape.leaf(Tensor<double>({2}, {1.0, 2.0}));
    auto loss = tape.constant(Tensor<double>::scalar(3.0));
    tape.backward(loss);
    REQUIRE(tape.grad(w)[0] == 0.0);
    REQUIRE(tape.grad(w)[1] == 0.0);
}

TEST_CASE("tape: gradient of sum of squares") {
    // loss = sum w^2 at w = [1, 2] via w^T w
    Tape<double> tape;
    auto col = tape.leaf(Tensor<double>({2, 1}, {1.0, 2.0}));
    auto row = tape.reshape(col, {1, 2});
    auto loss = tape.matmul(row, col);
    tape.backward(loss);
    // adjoint of the column leaf collects both routes: 2w
    REQUIRE(tape.grad(col)[0] == Approx(2.0));
    REQUIRE(tape.grad(col)[1] == Approx(4.0));
}

TEST_CASE("tape: backward demands a scalar loss") {
    Tape<double> tape;
    auto w = tape.leaf(Tensor<double>({2}, {1.0, 2.0}));
    REQUIRE_THROWS_AS(tape.backward(w), ContractViolation);
}

TEST_CASE("tape: kl(softmax) gradient matches finite differences") {
    const std::vector<double> logits0{1.0, 0.0, -1.0};
    auto eval = [](const std::vector<double>& x) {
        Tape<double> tape;
        auto logits = tape.constant(Tensor<double>({1, 3}, std::vector<double>(x)));
        auto kl = tape.mean_kl_uniform(tape.softmax_rows(logits));
        return static_cast<double>(tape.value(kl)[0]);
    };
    Tape<double> tape;
    auto logits = tape.leaf(Tensor<double>({1, 3}, std::vector<double>(logits0)));
    auto kl = tape.mean_kl_uniform(tape.softmax_rows(logits));
    tape.backward(kl);
    for (std::size_t i = 0; i < 3; ++i) {
        const double fd = oracle::central_difference(eval, logits0, i);
        REQUIRE(oracle::close_rel(tape.grad(logits)[static_cast<std::int64_t>(i)], fd, 1e-4));
    }
}

TEST_CASE("tape: every primitive matches finite differences on random input") {
    Rng rng(101);
    auto check = [&](auto build, std::vector<double> x0, Shape shape) {
        auto eval = [&](const std::vector<double>& x) {
            Tape<double> tape;
            auto in = tape.constant(Tensor<double>(shape, std::vector<double>(x)));
            return static_cast<double>(tape.value(build(tape, in))[0]);
        };
        Tape<double> tape;
        auto in = tape.leaf(Tensor<double>(shape, std::vector<double>(x0)));
        tape.backward(build(tape, in));
        for (std::size_t i = 0; i < x0.size(); ++i) {
            const double fd = oracle::central_difference(eval, x0, i);
            INFO("coordinate " << i);
            REQUIRE(oracle::close_rel(tape.grad(in)[static_cast<std::int64_t>(i)], fd, 1e-4, 1e-6));
        }
    };

    std::vector<double> x6(6);
    for (auto& v : x6) v = rng.uniform(-2.0, 2.0);

    // relu -> reduce via mean_log(sigmoid)
    check([](Tape<double>& t, auto in) { return t.mean_log(t.sigmoid(t.relu(in))); }, x6, {2, 3});
    // softmax + cross entropy
    check([](Tape<double>& t, auto in) {
        return t.mean_cross_entropy(t.softmax_rows(in), {2, 0});
    }, x6, {2, 3});
    // masked l2 over softmax rows
    check([](Tape<double>& t, auto in) {
        return t.masked_l2_sum(t.softmax_rows(in), {1, 0, 1});
    }, x6, {2, 3});
    // mean_log_one_minus over sigmoid
    check([](Tape<double>& t, auto in) { return t.mean_log_one_minus(t.sigmoid(in)); }, x6, {6});
    // matmul + bias chain
    {
        std::vector<double> w(6);
        for (auto& v : w) v = rng.uniform(-1.0, 1.0);
        auto eval = [&](const std::vector<double>& x) {
            Tape<double> tape;
            auto W = tape.constant(Tensor<double>({3, 2}, std::vector<double>(x)));
            auto in = tape.constant(Tensor<double>({2, 3}, std::vector<double>(w)));
            auto bias = tape.constant(Tensor<double>({2}, {0.1, -0.2}));
            return static_cast<double>(
                tape.value(tape.mean_log(tape.sigmoid(tape.add_bias(tape.matmul(in, W), bias))))[0]);
        };
        std::vector<double> w0(6);
        for (auto& v : w0) v = rng.uniform(-1.0, 1.0);
        Tape<double> tape;
        auto W = tape.leaf(Tensor<double>({3, 2}, std::vector<double>(w0)));
        auto in = tape.constant(Tensor<double>({2, 3}, std::vector<double>(w)));
        auto bias = tape.constant(Tensor<double>({2}, {0.1, -0.2}));
        tape.backward(tape.mean_log(tape.sigmoid(tape.add_bias(tape.matmul(in, W), bias))));
        for (std::size_t i = 0; i < w0.size(); ++i) {
            const double fd = oracle::central_difference(eval, w0, i);
            REQUIRE(oracle::close_rel(tape.grad(W)[static_cast<std::int64_t>(i)], fd, 1e-4, 1e-6));
        }
    }
}

TEST_CASE("tape: conv2d and maxpool gradients match finite differences") {
    Rng rng(55);
    std::vector<double> x0(2 * 5 * 5); // [1,2,5,5]
    for (auto& v : x0) v = rng.uniform(-1.0, 1.0);
    std::vector<double> w0(3 * 2 * 3 * 3);
    for (auto& v : w0) v = rng.uniform(-0.5, 0.5);
    const std::vector<double> b0 = {0.1, -0.1, 0.05};

    // gradient w.r.t. the input image
    {
        Tape<double> tape;
        auto X = tape.leaf(Tensor<double>({1, 2, 5, 5}, std::vector<double>(x0)));
        auto W = tape.constant(Tensor<double>({3, 2, 3, 3}, std::vector<double>(w0)));
        auto B = tape.constant(Tensor<double>({3}, std::vector<double>(b0)));
        auto loss = tape.mean_log(
            tape.sigmoid(tape.reshape(tape.maxpool2(tape.relu(tape.conv2d(X, W, B, 1, 1))),
                                      {1, 3 * 2 * 2})));
        tape.backward(loss);
        auto eval = [&](const std::vector<double>& x) {
            Tape<double> t;
            auto Xc = t.constant(Tensor<double>({1, 2, 5, 5}, std::vector<double>(x)));
            auto Wc = t.constant(Tensor<double>({3, 2, 3, 3}, std::vector<double>(w0)));
            auto Bc = t.constant(Tensor<double>({3}, std::vector<double>(b0)));
            return static_cast<double>(t.value(t.mean_log(t.sigmoid(
                t.reshape(t.maxpool2(t.relu(t.conv2d(Xc, Wc, Bc, 1, 1))), {1, 3 * 2 * 2}))))[0]);
        };
        for (std::size_t i = 0; i < x0.size(); i += 7) {
            const double fd = oracle::central_difference(eval, x0, i);
            REQUIRE(oracle::close_rel(tape.grad(X)[static_cast<std::int64_t>(i)], fd, 1e-4, 1e-6));
        }
    }
    // gradient w.r.t. the kernel
    {
        Tape<double> tape;
        auto X = tape.constant(Tensor<double>({1, 2, 5, 5}, std::vector<double>(x0)));
        auto W = tape.leaf(Tensor<double>({3, 2, 3, 3}, std::vector<double>(w0)));
        auto B = tape.constant(Tensor<double>({3}, std::vector<double>(b0)));
        auto loss = tape.mean_log(
            tape.sigmoid(tape.reshape(tape.maxpool2(tape.relu(tape.conv2d(X, W, B, 1, 1))),
                                      {1, 3 * 2 * 2})));
        tape.backward(loss);
        auto eval = [&](const std::vector<double>& w) {
            Tape<double> t;
            auto Xc = t.constant(Tensor<double>({1, 2, 5, 5}, std::vector<double>(x0)));
            auto Wc = t.constant(Tensor<double>({3, 2, 3, 3}, std::vector<double>(w)));
            auto Bc = t.constant(Tensor<double>({3}, std::vector<double>(b0)));
            return static_cast<double>(t.value(t.mean_log(t.sigmoid(
                t.reshape(t.maxpool2(t.relu(t.conv2d(Xc, Wc, Bc, 1, 1))), {1, 3 * 2 * 2}))))[0]);
        };
        for (std::size_t i = 0; i < w0.size(); i += 5) {
            const double fd = oracle::central_difference(eval, w0, i);
            REQUIRE(oracle::close_rel(tape.grad(W)[static_cast<std::int64_t>(i)], fd, 1e-4, 1e-6));
        }
    }
}

// ---- adam -------------------------------------------------------------------

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    std::vector<Tensor<double>> params{Tensor<double>({3}, {1.0, -2.0, 0.5})};
    const auto before = params;
    auto state = AdamState<double>::for_params(params);
    std::vector<Tensor<double>> grads{Tensor<double>({3})};
    adam_step(params, grads, state, 0.1);
    REQUIRE(params[0] == before[0]);
    REQUIRE(state.step == 1);
}

TEST_CASE("adam: first-step update magnitude equals the learning rate") {
    std::vector<Tensor<double>> params{Tensor<double>({1}, {1.0})};
    auto state = AdamState<double>::for_params(params);
    std::vector<Tensor<double>> grads{Tensor<double>({1}, {1.0})};
    adam_step(params, grads, state, 0.1);
    REQUIRE(params[0][0] == Approx(0.900000001).margin(1e-6));
}

TEST_CASE("adam: step counter advances by one per update") {
    std::vector<Tensor<double>> params{Tensor<double>({2}, {0.3, 0.7})};
    auto state = AdamState<double>::for_params(params);
    std::vector<Tensor<double>> grads{Tensor<double>({2}, {0.1, -0.1})};
    for (int i = 1; i <= 5; ++i) {
        adam_step(params, grads, state, 0.01);
        REQUIRE(state.step == i);
    }
}

TEST_CASE("adam rejects shape mismatches") {
    std::vector<Tensor<double>> params{Tensor<double>({2})};
    auto state = AdamState<double>::for_params(params);
    std::vector<Tensor<double>> grads{Tensor<double>({3})};
    REQUIRE_THROWS_AS(adam_step(params, grads, state, 0.1), ContractViolation);
}
