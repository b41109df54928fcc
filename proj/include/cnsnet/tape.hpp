#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "cnsnet/ops.hpp"
#include "cnsnet/tensor.hpp"

namespace cnsnet {

// Reverse-mode computation tape. Records primitive operations in order; a
// backward() replay visits them in exact reverse and accumulates adjoints.
// A tape instance is confined to one logical thread for the duration of one
// forward + backward pass.
//
// Leaves (parameters) track gradients; constants do not. Operation nodes
// inherit requires_grad from their inputs, so backward skips subgraphs that
// cannot reach a leaf — that is how a frozen network participates in a loss
// without receiving gradients.
template <class T>
class Tape {
public:
    using Id = std::int32_t;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Id constant(Tensor<T> v) { return push(std::move(v), false, {}); }
    Id leaf(Tensor<T> v) { return push(std::move(v), true, {}); }

    const Tensor<T>& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }

    // Adjoint of a node; meaningful after backward().
    const Tensor<T>& grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].adjoint; }

    std::size_t size() const { return nodes_.size(); }

    // ---- primitive operations -------------------------------------------

    Id matmul(Id a, Id b) {
        const Tensor<T>&A = value(a), &B = value(b);
        require(A.rank() == 2 && B.rank() == 2 && A.dim(1) == B.dim(0),
                "matmul shape mismatch " + shape_str(A.shape()) + " x " + shape_str(B.shape()));
        const std::int64_t n = A.dim(0), m = A.dim(1), p = B.dim(1);
        Tensor<T> C({n, p});
        std::vector<double> acc(static_cast<std::size_t>(p));
        for (std::int64_t i = 0; i < n; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::int64_t k = 0; k < m; ++k) {
                const double aik = static_cast<double>(A.at(i, k));
                const T* brow = B.data() + k * p;
                for (std::int64_t j = 0; j < p; ++j) acc[static_cast<std::size_t>(j)] += aik * static_cast<double>(brow[j]);
            }
            T* crow = C.data() + i * p;
            for (std::int64_t j = 0; j < p; ++j) crow[j] = static_cast<T>(acc[static_cast<std::size_t>(j)]);
        }
        return push(std::move(C), needs_grad({a, b}), [this, a, b](Id out) {
            const Tensor<T>&A = value(a), &B = value(b), &dC = grad_ref(out);
            const std::int64_t n = A.dim(0), m = A.dim(1), p = B.dim(1);
            if (requires_grad(a)) {
                Tensor<T>& dA = adjoint(a);
                for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t k = 0; k < m; ++k) {
                        double s = 0.0;
                        const T* dcrow = dC.data() + i * p;
                        const T* brow = B.data() + k * p;
                        for (std::int64_t j = 0; j < p; ++j) s += static_cast<double>(dcrow[j]) * static_cast<double>(brow[j]);
                        dA.at(i, k) += static_cast<T>(s);
                    }
            }
            if (requires_grad(b)) {
                // accumulate A^T dC row-contiguously in a double scratch
                std::vector<double> acc(static_cast<std::size_t>(m * p), 0.0);
                for (std::int64_t i = 0; i < n; ++i) {
                    const T* arow = A.data() + i * m;
                    const T* dcrow = dC.data() + i * p;
                    for (std::int64_t k = 0; k < m; ++k) {
                        const double aik = static_cast<double>(arow[k]);
                        double* dst = acc.data() + k * p;
                        for (std::int64_t j = 0; j < p; ++j) dst[j] += aik * static_cast<double>(dcrow[j]);
                    }
                }
                Tensor<T>& dB = adjoint(b);
                for (std::int64_t i = 0; i < m * p; ++i) dB[i] += static_cast<T>(acc[static_cast<std::size_t>(i)]);
            }
        });
    }

    // y[i,:] = x[i,:] + b
    Id add_bias(Id x, Id b) {
        const Tensor<T>&X = value(x), &B = value(b);
        require(X.rank() == 2 && B.numel() == X.dim(1), "add_bias width mismatch");
        Tensor<T> Y = X;
        for (std::int64_t i = 0; i < X.dim(0); ++i)
            for (std::int64_t j = 0; j < X.dim(1); ++j) Y.at(i, j) += B[j];
        return push(std::move(Y), needs_grad({x, b}), [this, x, b](Id out) {
            const Tensor<T>& dY = grad_ref(out);
            if (requires_grad(x)) {
                Tensor<T>& dX = adjoint(x);
                for (std::int64_t i = 0; i < dY.numel(); ++i) dX[i] += dY[i];
            }
            if (requires_grad(b)) {
                Tensor<T>& dB = adjoint(b);
                const std::int64_t n = dY.dim(0), m = dY.dim(1);
                for (std::int64_t j = 0; j < m; ++j) {
                    double s = 0.0;
                    for (std::int64_t i = 0; i < n; ++i) s += static_cast<double>(dY.at(i, j));
                    dB[j] += static_cast<T>(s);
                }
            }
        });
    }

    Id relu(Id x) {
        Tensor<T> Y = value(x);
        for (std::int64_t i = 0; i < Y.numel(); ++i)
            if (Y[i] < T(0)) Y[i] = T(0);
        return push(std::move(Y), needs_grad({x}), [this, x](Id out) {
            if (!requires_grad(x)) return;
            const Tensor<T>&X = value(x), &dY = grad_ref(out);
            Tensor<T>& dX = adjoint(x);
            for (std::int64_t i = 0; i < X.numel(); ++i)
                if (X[i] > T(0)) dX[i] += dY[i];
        });
    }

    Id sigmoid(Id x) {
        const Tensor<T>& X = value(x);
        Tensor<T> Y(X.shape());
        for (std::int64_t i = 0; i < X.numel(); ++i) {
            const double v = static_cast<double>(X[i]);
            Y[i] = static_cast<T>(v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                           : std::exp(v) / (1.0 + std::exp(v)));
        }
        return push(std::move(Y), needs_grad({x}), [this, x](Id out) {
            if (!requires_grad(x)) return;
            const Tensor<T>&Y = value(out), &dY = grad_ref(out);
            Tensor<T>& dX = adjoint(x);
            for (std::int64_t i = 0; i < Y.numel(); ++i) {
                const double y = static_cast<double>(Y[i]);
                dX[i] += static_cast<T>(static_cast<double>(dY[i]) * y * (1.0 - y));
            }
        });
    }

    // Gradient passes only strictly inside (lo, hi).
    Id clamp(Id x, T lo, T hi) {
        Tensor<T> Y = value(x);
        for (std::int64_t i = 0; i < Y.numel(); ++i) Y[i] = std::clamp(Y[i], lo, hi);
        return push(std::move(Y), needs_grad({x}), [this, x, lo, hi](Id out) {
            if (!requires_grad(x)) return;
            const Tensor<T>&X = value(x), &dY = grad_ref(out);
            Tensor<T>& dX = adjoint(x);
            for (std::int64_t i = 0; i < X.numel(); ++i)
                if (X[i] > lo && X[i] < hi) dX[i] += dY[i];
        });
    }

    Id softmax_rows(Id x) {
        Tensor<T> Y = cnsnet::softmax(value(x));
        return push(std::move(Y), needs_grad({x}), [this, x](Id out) {
            if (!requires_grad(x)) return;
            const Tensor<T>&Y = value(out), &dY = grad_ref(out);
            Tensor<T>& dX = adjoint(x);
            const std::int64_t n = Y.dim(0), k = Y.dim(1);
            for (std::int64_t i = 0; i < n; ++i) {
                double dot = 0.0;
                for (std::int64_t j = 0; j < k; ++j)
                    dot += static_cast<double>(dY.at(i, j)) * static_cast<double>(Y.at(i, j));
                for (std::int64_t j = 0; j < k; ++j)
                    dX.at(i, j) += static_cast<T>(static_cast<double>(Y.at(i, j)) *
                                                  (static_cast<double>(dY.at(i, j)) - dot));
            }
        });
    }

    Id reshape(Id x, Shape shape) {
        Tensor<T> Y = value(x).reshaped(std::move(shape));
        return push(std::move(Y), needs_grad({x}), [this, x](Id out) {
            if (!requires_grad(x)) return;
            const Tensor<T>& dY = grad_ref(out);
            Tensor<T>& dX = adjoint(x);
            for (std::int64_t i = 0; i < dY.numel(); ++i) dX[i] += dY[i];
        });
    }

    // NCHW convolution, square-free (any h/w), zero padding.
    Id conv2d(Id x, Id w, Id b, int stride, int pad) {
        const Tensor<T>&X = value(x), &W = value(w), &B = value(b);
        require(X.rank() == 4 && W.rank() == 4 && X.dim(1) == W.dim(1), "conv2d shape mismatch");
        require(B.numel() == W.dim(0), "conv2d bias width mismatch");
        const std::int64_t n = X.dim(0), c = X.dim(1), h = X.dim(2), wd = X.dim(3);
        const std::int64_t oc = W.dim(0), kh = W.dim(2), kw = W.dim(3);
        const std::int64_t oh = (h + 2 * pad - kh) / stride + 1;
        const std::int64_t ow = (wd + 2 * pad - kw) / stride + 1;
        require(oh > 0 && ow > 0, "conv2d output collapses to zero size");
        Tensor<T> Y({n, oc, oh, ow});
        for (std::int64_t in = 0; in < n; ++in)
            for (std::int64_t o = 0; o < oc; ++o)
                for (std::int64_t oy = 0; oy < oh; ++oy)
                    for (std::int64_t ox = 0; ox < ow; ++ox) {
                        double acc = static_cast<double>(B[o]);
                        for (std::int64_t ic = 0; ic < c; ++ic)
                            for (std::int64_t ky = 0; ky < kh; ++ky) {
                                const std::int64_t iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= h) continue;
                                for (std::int64_t kx = 0; kx < kw; ++kx) {
                                    const std::int64_t ix = ox * stride - pad + kx;
                                    if (ix < 0 || ix >= wd) continue;
                                    acc += static_cast<double>(X[((in * c + ic) * h + iy) * wd + ix]) *
                                           static_cast<double>(W[((o * c + ic) * kh + ky) * kw + kx]);
                                }
                            }
                        Y[((in * oc + o) * oh + oy) * ow + ox] = static_cast<T>(acc);
                    }
        return push(std::move(Y), needs_grad({x, w, b}), [this, x, w, b, stride, pad](Id out) {
            const Tensor<T>&X = value(x), &W = value(w), &dY = grad_ref(out);
            const std::int64_t n = X.dim(0), c = X.dim(1), h = X.dim(2), wd = X.dim(3);
            const std::int64_t oc = W.dim(0), kh = W.dim(2), kw = W.dim(3);
            const std::int64_t oh = dY.dim(2), ow = dY.dim(3);
            const bool gx = requires_grad(x), gw = requires_grad(w), gb = requires_grad(b);
            if (!gx && !gw && !gb) return;
            Tensor<T>* dX = gx ? &adjoint(x) : nullptr;
            Tensor<T>* dW = gw ? &adjoint(w) : nullptr;
            Tensor<T>* dB = gb ? &adjoint(b) : nullptr;
            for (std::int64_t in = 0; in < n; ++in)
                for (std::int64_t o = 0; o < oc; ++o)
                    for (std::int64_t oy = 0; oy < oh; ++oy)
                        for (std::int64_t ox = 0; ox < ow; ++ox) {
                            const T g = dY[((in * oc + o) * oh + oy) * ow + ox];
                            if (g == T(0)) continue;
                            if (dB) (*dB)[o] += g;
                            for (std::int64_t ic = 0; ic < c; ++ic)
                                for (std::int64_t ky = 0; ky < kh; ++ky) {
                                    const std::int64_t iy = oy * stride - pad + ky;
                                    if (iy < 0 || iy >= h) continue;
                                    for (std::int64_t kx = 0; kx < kw; ++kx) {
                                        const std::int64_t ix = ox * stride - pad + kx;
                                        if (ix < 0 || ix >= wd) continue;
                                        const std::int64_t xi = ((in * c + ic) * h + iy) * wd + ix;
                                        const std::int64_t wi = ((o * c + ic) * kh + ky) * kw + kx;
                                        if (dX) (*dX)[xi] += g * W[wi];
                                        if (dW) (*dW)[wi] += g * X[xi];
                                    }
                                }
                        }
        });
    }

    // 2x2 max pooling, stride 2, floor output size; ties keep the first
    // element scanned so replay is deterministic.
    Id maxpool2(Id x) {
        const Tensor<T>& X = value(x);
        require(X.rank() == 4, "maxpool2 expects NCHW");
        const std::int64_t n = X.dim(0), c = X.dim(1), h = X.dim(2), w = X.dim(3);
        const std::int64_t oh = h / 2, ow = w / 2;
        require(oh > 0 && ow > 0, "maxpool2 output collapses to zero size");
        Tensor<T> Y({n, c, oh, ow});
        auto argmax = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(Y.numel()));
        std::int64_t oi = 0;
        for (std::int64_t in = 0; in < n; ++in)
            for (std::int64_t ic = 0; ic < c; ++ic)
                for (std::int64_t oy = 0; oy < oh; ++oy)
                    for (std::int64_t ox = 0; ox < ow; ++ox, ++oi) {
                        T best{};
                        std::int64_t besti = -1;
                        for (std::int64_t ky = 0; ky < 2; ++ky)
                            for (std::int64_t kx = 0; kx < 2; ++kx) {
                                const std::int64_t xi =
                                    ((in * c + ic) * h + oy * 2 + ky) * w + ox * 2 + kx;
                                if (besti < 0 || X[xi] > best) {
                                    best = X[xi];
                                    besti = xi;
                                }
                            }
                        Y[oi] = best;
                        (*argmax)[static_cast<std::size_t>(oi)] = besti;
                    }
        return push(std::move(Y), needs_grad({x}), [this, x, argmax](Id out) {
            if (!requires_grad(x)) return;
            const Tensor<T>& dY = grad_ref(out);
            Tensor<T>& dX = adjoint(x);
            for (std::int64_t i = 0; i < dY.numel(); ++i)
                dX[(*argmax)[static_cast<std::size_t>(i)]] += dY[i];
        });
    }

    // ---- scalar reducers --------------------------------------------------

    // (1/n) sum_i -log clamp(p[i, label_i])
    Id mean_cross_entropy(Id probs, std::vector<int> labels) {
        const Tensor<T>& P = value(probs);
        require(P.rank() == 2 && P.dim(0) == static_cast<std::int64_t>(labels.size()),
                "mean_cross_entropy batch/label count mismatch");
        for (int y : labels)
            require(y >= 0 && y < P.dim(1), "mean_cross_entropy label out of range");
        const std::int64_t n = P.dim(0);
        double acc = 0.0;
        for (std::int64_t i = 0; i < n; ++i)
            acc -= std::log(clamp_log_arg(P.at(i, labels[static_cast<std::size_t>(i)])));
        return push(Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n))),
                    needs_grad({probs}), [this, probs, labels = std::move(labels)](Id out) {
                        if (!requires_grad(probs)) return;
                        const Tensor<T>& P = value(probs);
                        Tensor<T>& dP = adjoint(probs);
                        const double g = static_cast<double>(grad_ref(out)[0]);
                        const double n = static_cast<double>(P.dim(0));
                        for (std::int64_t i = 0; i < P.dim(0); ++i) {
                            const T p = P.at(i, labels[static_cast<std::size_t>(i)]);
                            if (p > T(kLogEps) && p < T(1))
                                dP.at(i, labels[static_cast<std::size_t>(i)]) -=
                                    static_cast<T>(g / (n * static_cast<double>(p)));
                        }
                    });
    }

    // (1/n) sum_i D_KL(U || p_i)
    Id mean_kl_uniform(Id probs) {
        const Tensor<T>& P = value(probs);
        require(P.rank() == 2 && P.dim(1) >= 2, "mean_kl_uniform needs [n, k>=2] probabilities");
        const std::int64_t n = P.dim(0), k = P.dim(1);
        const double u = 1.0 / static_cast<double>(k);
        double acc = 0.0;
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < k; ++j) acc += u * std::log(u / clamp_log_arg(P.at(i, j)));
        return push(Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n))),
                    needs_grad({probs}), [this, probs](Id out) {
                        if (!requires_grad(probs)) return;
                        const Tensor<T>& P = value(probs);
                        Tensor<T>& dP = adjoint(probs);
                        const double g = static_cast<double>(grad_ref(out)[0]);
                        const double n = static_cast<double>(P.dim(0));
                        const double u = 1.0 / static_cast<double>(P.dim(1));
                        for (std::int64_t i = 0; i < P.numel(); ++i) {
                            const T p = P[i];
                            if (p > T(kLogEps) && p < T(1))
                                dP[i] -= static_cast<T>(g * u / (n * static_cast<double>(p)));
                        }
                    });
    }

    // sum_i || mask (.) p_i ||_2 over rows
    Id masked_l2_sum(Id probs, std::vector<std::uint8_t> mask) {
        const Tensor<T>& P = value(probs);
        require(P.rank() == 2 && P.dim(1) == static_cast<std::int64_t>(mask.size()),
                "masked_l2_sum mask width mismatch");
        const std::int64_t n = P.dim(0), k = P.dim(1);
        auto norms = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
        double acc = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::int64_t j = 0; j < k; ++j)
                if (mask[static_cast<std::size_t>(j)]) {
                    const double p = static_cast<double>(P.at(i, j));
                    s += p * p;
                }
            (*norms)[static_cast<std::size_t>(i)] = std::sqrt(s);
            acc += (*norms)[static_cast<std::size_t>(i)];
        }
        return push(Tensor<T>::scalar(static_cast<T>(acc)), needs_grad({probs}),
                    [this, probs, mask = std::move(mask), norms](Id out) {
                        if (!requires_grad(probs)) return;
                        const Tensor<T>& P = value(probs);
                        Tensor<T>& dP = adjoint(probs);
                        const double g = static_cast<double>(grad_ref(out)[0]);
                        for (std::int64_t i = 0; i < P.dim(0); ++i) {
                            const double nm = (*norms)[static_cast<std::size_t>(i)];
                            if (nm == 0.0) continue;
                            for (std::int64_t j = 0; j < P.dim(1); ++j)
                                if (mask[static_cast<std::size_t>(j)])
                                    dP.at(i, j) +=
                                        static_cast<T>(g * static_cast<double>(P.at(i, j)) / nm);
                        }
                    });
    }

    // (1/n) sum_i log clamp(x_i)
    Id mean_log(Id x) { return mean_log_impl(x, false); }

    // (1/n) sum_i log clamp(1 - x_i)
    Id mean_log_one_minus(Id x) { return mean_log_impl(x, true); }

    Id add(Id a, Id b) {
        const Tensor<T>&A = value(a), &B = value(b);
        require(A.shape() == B.shape(), "add shape mismatch");
        Tensor<T> Y = A;
        for (std::int64_t i = 0; i < Y.numel(); ++i) Y[i] += B[i];
        return push(std::move(Y), needs_grad({a, b}), [this, a, b](Id out) {
            const Tensor<T>& dY = grad_ref(out);
            for (Id in : {a, b})
                if (requires_grad(in)) {
                    Tensor<T>& dI = adjoint(in);
                    for (std::int64_t i = 0; i < dY.numel(); ++i) dI[i] += dY[i];
                }
        });
    }

    Id scale(Id x, T factor) {
        Tensor<T> Y = value(x);
        for (std::int64_t i = 0; i < Y.numel(); ++i) Y[i] *= factor;
        return push(std::move(Y), needs_grad({x}), [this, x, factor](Id out) {
            if (!requires_grad(x)) return;
            const Tensor<T>& dY = grad_ref(out);
            Tensor<T>& dX = adjoint(x);
            for (std::int64_t i = 0; i < dY.numel(); ++i) dX[i] += factor * dY[i];
        });
    }

    // ---- replay -----------------------------------------------------------

    // Seeds the scalar loss adjoint with 1 and replays recorded operations in
    // reverse. Gradients of leaves are then available through grad().
    void backward(Id loss) {
        if (value(loss).numel() != 1)
            throw ContractViolation("backward requires a scalar loss node");
        for (auto& node : nodes_) node.adjoint = Tensor<T>(node.value.shape());
        adjoint(loss)[0] = T(1);
        for (std::int64_t i = static_cast<std::int64_t>(nodes_.size()) - 1; i >= 0; --i) {
            Node& node = nodes_[static_cast<std::size_t>(i)];
            if (node.backprop && node.requires_grad) node.backprop(static_cast<Id>(i));
        }
    }

    bool requires_grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> adjoint;
        bool requires_grad = false;
        std::function<void(Id)> backprop;
    };

    Id mean_log_impl(Id x, bool one_minus) {
        const Tensor<T>& X = value(x);
        const std::int64_t n = X.numel();
        require(n > 0, "mean_log over empty tensor");
        double acc = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double v = static_cast<double>(X[i]);
            acc += std::log(std::clamp(one_minus ? 1.0 - v : v, kLogEps, 1.0));
        }
        return push(Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n))),
                    needs_grad({x}), [this, x, one_minus](Id out) {
                        if (!requires_grad(x)) return;
                        const Tensor<T>& X = value(x);
                        Tensor<T>& dX = adjoint(x);
                        const double g = static_cast<double>(grad_ref(out)[0]);
                        const double n = static_cast<double>(X.numel());
                        for (std::int64_t i = 0; i < X.numel(); ++i) {
                            const double v = one_minus ? 1.0 - static_cast<double>(X[i])
                                                       : static_cast<double>(X[i]);
                            if (v > kLogEps && v < 1.0)
                                dX[i] += static_cast<T>((one_minus ? -1.0 : 1.0) * g / (n * v));
                        }
                    });
    }

    static void require(bool ok, const std::string& what) {
        if (!ok) throw ContractViolation("tape: " + what);
    }

    bool needs_grad(std::initializer_list<Id> inputs) const {
        for (Id id : inputs)
            if (requires_grad(id)) return true;
        return false;
    }

    Tensor<T>& adjoint(Id id) { return nodes_[static_cast<std::size_t>(id)].adjoint; }
    const Tensor<T>& grad_ref(Id id) const { return nodes_[static_cast<std::size_t>(id)].adjoint; }

    Id push(Tensor<T> v, bool req, std::function<void(Id)> backprop) {
        nodes_.push_back(Node{std::move(v), Tensor<T>(), req, std::move(backprop)});
        return static_cast<Id>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
};

} // namespace cnsnet
