// Differentiable operations on Tensor. Each op validates shapes, computes the
// forward value, and registers a backward closure that accumulates into the
// parents' grad buffers.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sttran/common.hpp"
#include "sttran/rng.hpp"
#include "sttran/tensor.hpp"

namespace sttran {
namespace detail {

// C += A(NxK) * B(KxM)
template <typename S>
void mm_nn(const S* A, const S* B, S* C, std::size_t N, std::size_t K, std::size_t M) {
    for (std::size_t i = 0; i < N; ++i) {
        const S* a = A + i * K;
        S* c = C + i * M;
        for (std::size_t k = 0; k < K; ++k) {
            const S av = a[k];
            if (av == S(0)) continue;
            const S* b = B + k * M;
            for (std::size_t m = 0; m < M; ++m) c[m] += av * b[m];
        }
    }
}

// C += A(NxK) * B(MxK)^T
template <typename S>
void mm_nt(const S* A, const S* B, S* C, std::size_t N, std::size_t K, std::size_t M) {
    for (std::size_t i = 0; i < N; ++i) {
        const S* a = A + i * K;
        S* c = C + i * M;
        for (std::size_t m = 0; m < M; ++m) {
            const S* b = B + m * K;
            S acc = S(0);
            for (std::size_t k = 0; k < K; ++k) acc += a[k] * b[k];
            c[m] += acc;
        }
    }
}

// C += A(NxK)^T * B(NxM), C is KxM
template <typename S>
void mm_tn(const S* A, const S* B, S* C, std::size_t N, std::size_t K, std::size_t M) {
    for (std::size_t n = 0; n < N; ++n) {
        const S* a = A + n * K;
        const S* b = B + n * M;
        for (std::size_t k = 0; k < K; ++k) {
            const S av = a[k];
            if (av == S(0)) continue;
            S* c = C + k * M;
            for (std::size_t m = 0; m < M; ++m) c[m] += av * b[m];
        }
    }
}

template <typename S>
void require_2d(const Tensor<S>& t, const char* who) {
    if (t.ndim() != 2) throw DimensionError(std::string(who) + " expects a 2-d tensor, got " + shape_str(t.shape()));
}

}  // namespace detail

// ---- elementwise and broadcast arithmetic ----------------------------------

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<S> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto an = a.node(), bn = b.node();
    return Tensor<S>::make_op(a.shape(), std::move(out), {a, b}, [an, bn](auto& self) {
        if (an->requires_grad) accumulate_grad<S>(*an, self.grad.data());
        if (bn->requires_grad) accumulate_grad<S>(*bn, self.grad.data());
    });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<S> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    auto an = a.node(), bn = b.node();
    return Tensor<S>::make_op(a.shape(), std::move(out), {a, b}, [an, bn](auto& self) {
        if (an->requires_grad) accumulate_grad<S>(*an, self.grad.data());
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
        }
    });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw DimensionError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<S> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto an = a.node(), bn = b.node();
    return Tensor<S>::make_op(a.shape(), std::move(out), {a, b}, [an, bn](auto& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
        }
    });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
    std::vector<S> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    auto an = a.node();
    return Tensor<S>::make_op(a.shape(), std::move(out), {a}, [an, c](auto& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * c;
    });
}

// x: NxD, v: D (or 1xD); adds v to every row
template <typename S>
Tensor<S> add_rowvec(const Tensor<S>& x, const Tensor<S>& v) {
    detail::require_2d(x, "add_rowvec");
    const std::size_t N = x.dim(0), D = x.dim(1);
    if (v.numel() != D)
        throw DimensionError("add_rowvec: vector " + shape_str(v.shape()) + " does not match row width " +
                             shape_str(x.shape()));
    std::vector<S> out(x.numel());
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t d = 0; d < D; ++d) out[n * D + d] = x.data()[n * D + d] + v.data()[d];
    auto xn = x.node(), vn = v.node();
    return Tensor<S>::make_op(x.shape(), std::move(out), {x, v}, [xn, vn, N, D](auto& self) {
        if (xn->requires_grad) accumulate_grad<S>(*xn, self.grad.data());
        if (vn->requires_grad) {
            vn->ensure_grad();
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t d = 0; d < D; ++d) vn->grad[d] += self.grad[n * D + d];
        }
    });
}

// n-ary same-shape sum; one node regardless of the number of terms
template <typename S>
Tensor<S> sum_list(const std::vector<Tensor<S>>& xs) {
    check_contract(!xs.empty(), "sum_list: empty term list");
    for (const auto& t : xs)
        if (t.shape() != xs[0].shape())
            throw DimensionError("sum_list: shape mismatch " + shape_str(t.shape()) + " vs " +
                                 shape_str(xs[0].shape()));
    std::vector<S> out(xs[0].numel(), S(0));
    for (const auto& t : xs)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += t.data()[i];
    std::vector<std::shared_ptr<typename Tensor<S>::Node>> nodes;
    for (const auto& t : xs) nodes.push_back(t.node());
    return Tensor<S>::make_op(xs[0].shape(), std::move(out), xs, [nodes](auto& self) {
        for (auto& n : nodes)
            if (n->requires_grad) accumulate_grad<S>(*n, self.grad.data());
    });
}

// ---- matrix products --------------------------------------------------------

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_2d(a, "matmul");
    detail::require_2d(b, "matmul");
    const std::size_t N = a.dim(0), K = a.dim(1), M = b.dim(1);
    if (b.dim(0) != K)
        throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    std::vector<S> out(N * M, S(0));
    detail::mm_nn(a.data().data(), b.data().data(), out.data(), N, K, M);
    auto an = a.node(), bn = b.node();
    return Tensor<S>::make_op({N, M}, std::move(out), {a, b}, [an, bn, N, K, M](auto& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            detail::mm_nt(self.grad.data(), bn->value.data(), an->grad.data(), N, M, K);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            detail::mm_tn(an->value.data(), self.grad.data(), bn->grad.data(), N, K, M);
        }
    });
}

// a (NxK) times b^T where b is MxK
template <typename S>
Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_2d(a, "matmul_nt");
    detail::require_2d(b, "matmul_nt");
    const std::size_t N = a.dim(0), K = a.dim(1), M = b.dim(0);
    if (b.dim(1) != K)
        throw DimensionError("matmul_nt: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()) + "^T");
    std::vector<S> out(N * M, S(0));
    detail::mm_nt(a.data().data(), b.data().data(), out.data(), N, K, M);
    auto an = a.node(), bn = b.node();
    return Tensor<S>::make_op({N, M}, std::move(out), {a, b}, [an, bn, N, K, M](auto& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            detail::mm_nn(self.grad.data(), bn->value.data(), an->grad.data(), N, M, K);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            detail::mm_tn(self.grad.data(), an->value.data(), bn->grad.data(), N, M, K);
        }
    });
}

// y = x w (+ b). The workhorse behind every learned linear map.
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>* b = nullptr) {
    detail::require_2d(x, "linear");
    detail::require_2d(w, "linear");
    if (x.dim(1) != w.dim(0))
        throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                             shape_str(w.shape()));
    Tensor<S> y = matmul(x, w);
    if (b) y = add_rowvec(y, *b);
    return y;
}

// ---- activations ------------------------------------------------------------

template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
    std::vector<S> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] > S(0) ? x.data()[i] : S(0);
    auto xn = x.node();
    return Tensor<S>::make_op(x.shape(), std::move(out), {x}, [xn](auto& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (xn->value[i] > S(0)) xn->grad[i] += self.grad[i];
    });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
    std::vector<S> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const S v = x.data()[i];
        out[i] = v >= S(0) ? S(1) / (S(1) + std::exp(-v)) : std::exp(v) / (S(1) + std::exp(v));
    }
    auto xn = x.node();
    return Tensor<S>::make_op(x.shape(), std::move(out), {x}, [xn](auto& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const S y = self.value[i];
            xn->grad[i] += self.grad[i] * y * (S(1) - y);
        }
    });
}

// ---- softmax ----------------------------------------------------------------

// Max-subtracted softmax along `axis`. NaN inputs are rejected.
template <typename S>
Tensor<S> softmax(const Tensor<S>& x, std::size_t axis) {
    if (axis >= x.ndim())
        throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " + shape_str(x.shape()));
    for (S v : x.data())
        if (std::isnan(static_cast<double>(v))) throw NumericError("softmax: NaN in input");

    const auto& shape = x.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
    const std::size_t n = shape[axis];

    std::vector<S> out(x.numel());
    const S* xd = x.data().data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * n * inner + in;
            S mx = xd[base];
            for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xd[base + j * inner]);
            S sum = S(0);
            for (std::size_t j = 0; j < n; ++j) {
                const S e = std::exp(xd[base + j * inner] - mx);
                out[base + j * inner] = e;
                sum += e;
            }
            for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= sum;
        }
    }
    auto xn = x.node();
    return Tensor<S>::make_op(x.shape(), std::move(out), {x}, [xn, outer, inner, n](auto& self) {
        xn->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * n * inner + in;
                S dot = S(0);
                for (std::size_t j = 0; j < n; ++j) dot += self.grad[base + j * inner] * self.value[base + j * inner];
                for (std::size_t j = 0; j < n; ++j) {
                    const std::size_t k = base + j * inner;
                    xn->grad[k] += (self.grad[k] - dot) * self.value[k];
                }
            }
        }
    });
}

template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& x) {
    detail::require_2d(x, "softmax_rows");
    return softmax(x, 1);
}

// ---- normalization ----------------------------------------------------------

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias, S eps = S(1e-5)) {
    detail::require_2d(x, "layer_norm");
    const std::size_t N = x.dim(0), D = x.dim(1);
    if (gain.numel() != D || bias.numel() != D)
        throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" + shape_str(bias.shape()) +
                             " do not match width of " + shape_str(x.shape()));

    std::vector<S> out(x.numel());
    std::vector<S> xhat(x.numel());
    std::vector<S> inv_std(N);
    for (std::size_t r = 0; r < N; ++r) {
        const S* row = x.data().data() + r * D;
        S mean = S(0);
        for (std::size_t d = 0; d < D; ++d) mean += row[d];
        mean /= S(D);
        S var = S(0);
        for (std::size_t d = 0; d < D; ++d) {
            const S c = row[d] - mean;
            var += c * c;
        }
        var /= S(D);
        const S istd = S(1) / std::sqrt(var + eps);
        inv_std[r] = istd;
        for (std::size_t d = 0; d < D; ++d) {
            const S h = (row[d] - mean) * istd;
            xhat[r * D + d] = h;
            out[r * D + d] = gain.data()[d] * h + bias.data()[d];
        }
    }
    auto xn = x.node(), gn = gain.node(), bn = bias.node();
    return Tensor<S>::make_op(
        x.shape(), std::move(out), {x, gain, bias},
        [xn, gn, bn, N, D, xhat = std::move(xhat), inv_std = std::move(inv_std)](auto& self) {
            for (std::size_t r = 0; r < N; ++r) {
                const S istd = inv_std[r];
                const S* dy = self.grad.data() + r * D;
                const S* h = xhat.data() + r * D;
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (std::size_t d = 0; d < D; ++d) gn->grad[d] += dy[d] * h[d];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (std::size_t d = 0; d < D; ++d) bn->grad[d] += dy[d];
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    S sum_dh = S(0), sum_dh_h = S(0);
                    for (std::size_t d = 0; d < D; ++d) {
                        const S dh = dy[d] * gn->value[d];
                        sum_dh += dh;
                        sum_dh_h += dh * h[d];
                    }
                    S* dx = xn->grad.data() + r * D;
                    for (std::size_t d = 0; d < D; ++d) {
                        const S dh = dy[d] * gn->value[d];
                        dx[d] += istd * (dh - sum_dh / S(D) - h[d] * sum_dh_h / S(D));
                    }
                }
            }
        });
}

// Running statistics owned by the module that uses batch_norm.
template <typename S>
struct BatchNormState {
    std::vector<S> running_mean;
    std::vector<S> running_var;
    explicit BatchNormState(std::size_t d = 0) : running_mean(d, S(0)), running_var(d, S(1)) {}
};

// Train mode normalizes by batch statistics (biased variance) and updates the
// running stats in place; eval mode normalizes by running stats. A train-mode
// batch of one falls back to running stats with a warning.
template <typename S>
Tensor<S> batch_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta, BatchNormState<S>& state,
                     bool training, S momentum = S(0.1), S eps = S(1e-5)) {
    detail::require_2d(x, "batch_norm");
    const std::size_t N = x.dim(0), D = x.dim(1);
    if (gamma.numel() != D || beta.numel() != D || state.running_mean.size() != D || state.running_var.size() != D)
        throw DimensionError("batch_norm: parameter widths do not match input " + shape_str(x.shape()));

    bool use_batch_stats = training && N >= 2;
    if (training && N < 2) log_warn("batch_norm: train-mode batch of one, using running statistics");

    std::vector<S> mean(D), var(D);
    if (use_batch_stats) {
        for (std::size_t d = 0; d < D; ++d) {
            S m = S(0);
            for (std::size_t r = 0; r < N; ++r) m += x.data()[r * D + d];
            m /= S(N);
            S v = S(0);
            for (std::size_t r = 0; r < N; ++r) {
                const S c = x.data()[r * D + d] - m;
                v += c * c;
            }
            v /= S(N);
            mean[d] = m;
            var[d] = v;
            state.running_mean[d] = (S(1) - momentum) * state.running_mean[d] + momentum * m;
            state.running_var[d] = (S(1) - momentum) * state.running_var[d] + momentum * v;
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    std::vector<S> out(x.numel());
    std::vector<S> xhat(x.numel());
    std::vector<S> inv_std(D);
    for (std::size_t d = 0; d < D; ++d) inv_std[d] = S(1) / std::sqrt(var[d] + eps);
    for (std::size_t r = 0; r < N; ++r)
        for (std::size_t d = 0; d < D; ++d) {
            const S h = (x.data()[r * D + d] - mean[d]) * inv_std[d];
            xhat[r * D + d] = h;
            out[r * D + d] = gamma.data()[d] * h + beta.data()[d];
        }

    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return Tensor<S>::make_op(
        x.shape(), std::move(out), {x, gamma, beta},
        [xn, gn, bn, N, D, use_batch_stats, xhat = std::move(xhat), inv_std = std::move(inv_std)](auto& self) {
            if (gn->requires_grad) {
                gn->ensure_grad();
                for (std::size_t r = 0; r < N; ++r)
                    for (std::size_t d = 0; d < D; ++d) gn->grad[d] += self.grad[r * D + d] * xhat[r * D + d];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t r = 0; r < N; ++r)
                    for (std::size_t d = 0; d < D; ++d) bn->grad[d] += self.grad[r * D + d];
            }
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            if (!use_batch_stats) {
                for (std::size_t r = 0; r < N; ++r)
                    for (std::size_t d = 0; d < D; ++d)
                        xn->grad[r * D + d] += self.grad[r * D + d] * gn->value[d] * inv_std[d];
                return;
            }
            // backward through the batch statistics
            for (std::size_t d = 0; d < D; ++d) {
                S sum_dh = S(0), sum_dh_h = S(0);
                for (std::size_t r = 0; r < N; ++r) {
                    const S dh = self.grad[r * D + d] * gn->value[d];
                    sum_dh += dh;
                    sum_dh_h += dh * xhat[r * D + d];
                }
                for (std::size_t r = 0; r < N; ++r) {
                    const S dh = self.grad[r * D + d] * gn->value[d];
                    xn->grad[r * D + d] +=
                        inv_std[d] * (dh - sum_dh / S(N) - xhat[r * D + d] * sum_dh_h / S(N));
                }
            }
        });
}

// ---- dropout ----------------------------------------------------------------

// Inverted dropout with a mask fully determined by stream_seed; the caller
// derives stream_seed from (run seed, step, op id).
template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double rate, std::uint64_t stream_seed) {
    check_contract(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
    if (rate == 0.0) return x;
    const double keep = 1.0 - rate;
    std::vector<S> out(x.numel());
    std::vector<std::uint8_t> mask(x.numel());
    std::uint64_t state = stream_seed;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double u = static_cast<double>(mix64(state + i) >> 11) * 0x1.0p-53;
        mask[i] = u < keep;
        out[i] = mask[i] ? static_cast<S>(x.data()[i] / keep) : S(0);
    }
    auto xn = x.node();
    return Tensor<S>::make_op(x.shape(), std::move(out), {x}, [xn, keep, mask = std::move(mask)](auto& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (mask[i]) xn->grad[i] += self.grad[i] / static_cast<S>(keep);
    });
}

// ---- structural ops ----------------------------------------------------------

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(new_shape));
    std::vector<S> out = x.data();
    auto xn = x.node();
    return Tensor<S>::make_op(std::move(new_shape), std::move(out), {x},
                              [xn](auto& self) { accumulate_grad<S>(*xn, self.grad.data()); });
}

template <typename S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& xs) {
    check_contract(!xs.empty(), "concat_cols: empty list");
    const std::size_t N = xs[0].dim(0);
    std::size_t total = 0;
    for (const auto& t : xs) {
        detail::require_2d(t, "concat_cols");
        if (t.dim(0) != N)
            throw DimensionError("concat_cols: row mismatch " + shape_str(t.shape()) + " vs " +
                                 shape_str(xs[0].shape()));
        total += t.dim(1);
    }
    std::vector<S> out(N * total);
    std::vector<std::size_t> widths;
    std::size_t off = 0;
    for (const auto& t : xs) {
        const std::size_t D = t.dim(1);
        for (std::size_t r = 0; r < N; ++r)
            std::copy(t.data().begin() + r * D, t.data().begin() + (r + 1) * D, out.begin() + r * total + off);
        widths.push_back(D);
        off += D;
    }
    std::vector<std::shared_ptr<typename Tensor<S>::Node>> nodes;
    for (const auto& t : xs) nodes.push_back(t.node());
    return Tensor<S>::make_op({N, total}, std::move(out), xs, [nodes, widths, N, total](auto& self) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const std::size_t D = widths[i];
            if (nodes[i]->requires_grad) {
                nodes[i]->ensure_grad();
                for (std::size_t r = 0; r < N; ++r)
                    for (std::size_t d = 0; d < D; ++d) nodes[i]->grad[r * D + d] += self.grad[r * total + off + d];
            }
            off += D;
        }
    });
}

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& xs) {
    check_contract(!xs.empty(), "concat_rows: empty list");
    const std::size_t D = xs[0].dim(1);
    std::size_t rows = 0;
    for (const auto& t : xs) {
        detail::require_2d(t, "concat_rows");
        if (t.dim(1) != D)
            throw DimensionError("concat_rows: column mismatch " + shape_str(t.shape()) + " vs " +
                                 shape_str(xs[0].shape()));
        rows += t.dim(0);
    }
    std::vector<S> out;
    out.reserve(rows * D);
    std::vector<std::size_t> counts;
    for (const auto& t : xs) {
        out.insert(out.end(), t.data().begin(), t.data().end());
        counts.push_back(t.dim(0));
    }
    std::vector<std::shared_ptr<typename Tensor<S>::Node>> nodes;
    for (const auto& t : xs) nodes.push_back(t.node());
    return Tensor<S>::make_op({rows, D}, std::move(out), xs, [nodes, counts, D](auto& self) {
        std::size_t row = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i]->requires_grad) {
                nodes[i]->ensure_grad();
                for (std::size_t j = 0; j < counts[i] * D; ++j) nodes[i]->grad[j] += self.grad[row * D + j];
            }
            row += counts[i];
        }
    });
}

template <typename S>
Tensor<S> gather_rows(const Tensor<S>& x, const std::vector<std::size_t>& idx) {
    detail::require_2d(x, "gather_rows");
    const std::size_t D = x.dim(1);
    for (std::size_t i : idx)
        check_contract(i < x.dim(0), "gather_rows: index " + std::to_string(i) + " out of range for " +
                                         shape_str(x.shape()));
    std::vector<S> out(idx.size() * D);
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy(x.data().begin() + idx[r] * D, x.data().begin() + (idx[r] + 1) * D, out.begin() + r * D);
    auto xn = x.node();
    return Tensor<S>::make_op({idx.size(), D}, std::move(out), {x}, [xn, idx, D](auto& self) {
        xn->ensure_grad();
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t d = 0; d < D; ++d) xn->grad[idx[r] * D + d] += self.grad[r * D + d];
    });
}

template <typename S>
Tensor<S> slice_cols(const Tensor<S>& x, std::size_t start, std::size_t len) {
    detail::require_2d(x, "slice_cols");
    const std::size_t N = x.dim(0), D = x.dim(1);
    check_contract(start + len <= D, "slice_cols: range exceeds " + shape_str(x.shape()));
    std::vector<S> out(N * len);
    for (std::size_t r = 0; r < N; ++r)
        std::copy(x.data().begin() + r * D + start, x.data().begin() + r * D + start + len, out.begin() + r * len);
    auto xn = x.node();
    return Tensor<S>::make_op({N, len}, std::move(out), {x}, [xn, N, D, start, len](auto& self) {
        xn->ensure_grad();
        for (std::size_t r = 0; r < N; ++r)
            for (std::size_t d = 0; d < len; ++d) xn->grad[r * D + start + d] += self.grad[r * len + d];
    });
}

// ---- reductions ---------------------------------------------------------------

template <typename S>
Tensor<S> sum_all(const Tensor<S>& x) {
    S s = S(0);
    for (S v : x.data()) s += v;
    auto xn = x.node();
    return Tensor<S>::make_op({1}, {s}, {x}, [xn](auto& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += self.grad[0];
    });
}

template <typename S>
Tensor<S> mean_all(const Tensor<S>& x) {
    return scale(sum_all(x), S(1) / static_cast<S>(x.numel()));
}

// ---- convolution (single image, NCHW without the N) ----------------------------

// x: [Cin,H,W], w: [Cout,Cin,kh,kw], b: [Cout]; valid padding `pad`, stride `stride`.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, std::size_t stride, std::size_t pad) {
    if (x.ndim() != 3 || w.ndim() != 4)
        throw DimensionError("conv2d: expects x[C,H,W], w[Co,Ci,kh,kw]; got " + shape_str(x.shape()) + ", " +
                             shape_str(w.shape()));
    const std::size_t Ci = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t Co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != Ci)
        throw DimensionError("conv2d: channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
    if (b.numel() != Co) throw DimensionError("conv2d: bias " + shape_str(b.shape()) + " vs Cout");
    check_contract(H + 2 * pad >= kh && W + 2 * pad >= kw, "conv2d: kernel larger than padded input");
    const std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
    const std::size_t Wo = (W + 2 * pad - kw) / stride + 1;

    std::vector<S> out(Co * Ho * Wo, S(0));
    const S* xd = x.data().data();
    const S* wd = w.data().data();
    for (std::size_t co = 0; co < Co; ++co) {
        for (std::size_t oy = 0; oy < Ho; ++oy) {
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                S acc = b.data()[co];
                for (std::size_t ci = 0; ci < Ci; ++ci) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                      static_cast<std::ptrdiff_t>(pad);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                            acc += xd[(ci * H + iy) * W + ix] * wd[((co * Ci + ci) * kh + ky) * kw + kx];
                        }
                    }
                }
                out[(co * Ho + oy) * Wo + ox] = acc;
            }
        }
    }
    auto xn = x.node(), wn = w.node(), bn = b.node();
    return Tensor<S>::make_op(
        {Co, Ho, Wo}, std::move(out), {x, w, b}, [xn, wn, bn, Ci, H, W, Co, kh, kw, Ho, Wo, stride, pad](auto& self) {
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t co = 0; co < Co; ++co) {
                    S acc = S(0);
                    for (std::size_t i = 0; i < Ho * Wo; ++i) acc += self.grad[co * Ho * Wo + i];
                    bn->grad[co] += acc;
                }
            }
            const bool need_dx = xn->requires_grad, need_dw = wn->requires_grad;
            if (!need_dx && !need_dw) return;
            if (need_dx) xn->ensure_grad();
            if (need_dw) wn->ensure_grad();
            for (std::size_t co = 0; co < Co; ++co) {
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                        const S g = self.grad[(co * Ho + oy) * Wo + ox];
                        if (g == S(0)) continue;
                        for (std::size_t ci = 0; ci < Ci; ++ci) {
                            for (std::size_t ky = 0; ky < kh; ++ky) {
                                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                                          static_cast<std::ptrdiff_t>(pad);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                                for (std::size_t kx = 0; kx < kw; ++kx) {
                                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                              static_cast<std::ptrdiff_t>(pad);
                                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                    const std::size_t xi = (ci * H + iy) * W + ix;
                                    const std::size_t wi = ((co * Ci + ci) * kh + ky) * kw + kx;
                                    if (need_dx) xn->grad[xi] += g * wn->value[wi];
                                    if (need_dw) wn->grad[wi] += g * xn->value[xi];
                                }
                            }
                        }
                    }
                }
            }
        });
}

// ---- losses --------------------------------------------------------------------

// Multi-label margin: sum over p in P+, q in P- of max(0, 1 - s[p] + s[q]).
// Empty P+ or P- yields a constant zero.
template <typename S>
Tensor<S> multilabel_margin(const Tensor<S>& scores, const std::vector<std::size_t>& pos,
                            const std::vector<std::size_t>& neg) {
    check_contract(scores.ndim() == 1 || (scores.ndim() == 2 && scores.dim(0) == 1),
                   "multilabel_margin: scores must be a vector");
    const std::size_t V = scores.numel();
    for (std::size_t p : pos) check_contract(p < V, "multilabel_margin: positive id out of range");
    for (std::size_t q : neg) check_contract(q < V, "multilabel_margin: negative id out of range");
    S loss = S(0);
    for (std::size_t p : pos)
        for (std::size_t q : neg) {
            const S z = S(1) - scores.data()[p] + scores.data()[q];
            if (z > S(0)) loss += z;
        }
    auto sn = scores.node();
    return Tensor<S>::make_op({1}, {loss}, {scores}, [sn, pos, neg](auto& self) {
        sn->ensure_grad();
        const S g = self.grad[0];
        for (std::size_t p : pos)
            for (std::size_t q : neg) {
                const S z = S(1) - sn->value[p] + sn->value[q];
                if (z > S(0)) {
                    sn->grad[p] -= g;
                    sn->grad[q] += g;
                }
            }
    });
}

// Mean cross entropy over rows of logits against integer targets.
template <typename S>
Tensor<S> cross_entropy_mean(const Tensor<S>& logits, const std::vector<std::size_t>& targets) {
    detail::require_2d(logits, "cross_entropy_mean");
    const std::size_t N = logits.dim(0), C = logits.dim(1);
    check_contract(targets.size() == N, "cross_entropy_mean: target count mismatch");
    for (std::size_t t : targets) check_contract(t < C, "cross_entropy_mean: target id out of range");
    S total = S(0);
    std::vector<S> probs(N * C);
    for (std::size_t r = 0; r < N; ++r) {
        const S* row = logits.data().data() + r * C;
        S mx = row[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        S sum = S(0);
        for (std::size_t c = 0; c < C; ++c) {
            probs[r * C + c] = std::exp(row[c] - mx);
            sum += probs[r * C + c];
        }
        for (std::size_t c = 0; c < C; ++c) probs[r * C + c] /= sum;
        total += std::log(sum) + mx - row[targets[r]];
    }
    total /= S(N);
    auto ln = logits.node();
    return Tensor<S>::make_op({1}, {total}, {logits}, [ln, targets, N, C, probs = std::move(probs)](auto& self) {
        ln->ensure_grad();
        const S g = self.grad[0] / S(N);
        for (std::size_t r = 0; r < N; ++r)
            for (std::size_t c = 0; c < C; ++c)
                ln->grad[r * C + c] += g * (probs[r * C + c] - (targets[r] == c ? S(1) : S(0)));
    });
}

}  // namespace sttran
