// Spatial encoder, frame encoding, and sliding-window temporal decoder.
//
// An attention layer here is: multi-head dot-product attention, residual add
// and layer norm, then a two-layer FFN with another residual + layer norm.
// The temporal decoder reuses the same layer (no causal masking); queries and
// keys get the slot-wise frame encoding added, values do not.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sttran/config.hpp"
#include "sttran/ops.hpp"
#include "sttran/rng.hpp"
#include "sttran/tensor.hpp"

namespace sttran {

// Deterministic dropout bookkeeping: each op application inside one forward
// gets a fresh id, so masks are pinned by (seed, step, op id).
struct DropoutCtx {
    bool training = false;
    double rate = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
    std::uint64_t next_op = 0;

    std::uint64_t stream() { return mix64(seed, step, ++next_op); }
    bool active() const { return training && rate > 0.0; }
};

template <typename S>
Tensor<S> apply_dropout(const Tensor<S>& x, DropoutCtx& ctx) {
    if (!ctx.active()) return x;
    return dropout(x, ctx.rate, ctx.stream());
}

// Scaled dot-product attention. Each output row is a convex combination of
// rows of V.
template <typename S>
Tensor<S> attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v) {
    detail::require_2d(q, "attention");
    detail::require_2d(k, "attention");
    detail::require_2d(v, "attention");
    check_contract(k.dim(0) >= 1, "attention: empty key/value set");
    if (q.dim(1) != k.dim(1))
        throw DimensionError("attention: query dim " + shape_str(q.shape()) + " vs key dim " + shape_str(k.shape()));
    if (k.dim(0) != v.dim(0))
        throw DimensionError("attention: key count " + shape_str(k.shape()) + " vs value count " +
                             shape_str(v.shape()));
    const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(q.dim(1))));
    Tensor<S> logits = scale(matmul_nt(q, k), inv_sqrt);
    return matmul(softmax_rows(logits), v);
}

template <typename S>
struct AttLayerParams {
    Tensor<S> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<S> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Tensor<S> ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    std::size_t n_heads = 1;
};

// Concat(h_1..h_h) W_O with h_i computed on per-head slices of the shared
// D x D projections.
template <typename S>
Tensor<S> multi_head(const Tensor<S>& x_q, const Tensor<S>& x_k, const Tensor<S>& x_v,
                     const AttLayerParams<S>& p) {
    const std::size_t d = x_q.dim(1);
    if (d % p.n_heads != 0)
        throw ConfigError("multi_head: width " + std::to_string(d) + " not divisible by heads " +
                          std::to_string(p.n_heads));
    const std::size_t dh = d / p.n_heads;
    Tensor<S> q = linear(x_q, p.wq, &p.bq);
    Tensor<S> k = linear(x_k, p.wk, &p.bk);
    Tensor<S> v = linear(x_v, p.wv, &p.bv);
    std::vector<Tensor<S>> heads;
    heads.reserve(p.n_heads);
    for (std::size_t h = 0; h < p.n_heads; ++h)
        heads.push_back(attention(slice_cols(q, h * dh, dh), slice_cols(k, h * dh, dh), slice_cols(v, h * dh, dh)));
    return linear(p.n_heads == 1 ? heads[0] : concat_cols(heads), p.wo, &p.bo);
}

// Full layer; x_residual is the stream the sublayer outputs are added to
// (the encoder passes the same tensor for all four arguments).
template <typename S>
Tensor<S> att_layer(const Tensor<S>& x_q, const Tensor<S>& x_k, const Tensor<S>& x_v, const Tensor<S>& x_residual,
                    const AttLayerParams<S>& p, DropoutCtx& ctx) {
    Tensor<S> att = apply_dropout(multi_head(x_q, x_k, x_v, p), ctx);
    Tensor<S> y1 = layer_norm(add(x_residual, att), p.ln1_gain, p.ln1_bias);
    Tensor<S> h = apply_dropout(relu(linear(y1, p.ffn_w1, &p.ffn_b1)), ctx);
    Tensor<S> ff = apply_dropout(linear(h, p.ffn_w2, &p.ffn_b2), ctx);
    return layer_norm(add(y1, ff), p.ln2_gain, p.ln2_bias);
}

// Self-attention stack over the entries of a single frame; no positional
// encoding. Zero layers means identity.
template <typename S>
Tensor<S> spatial_encoder(const Tensor<S>& x, const std::vector<AttLayerParams<S>>& layers, DropoutCtx& ctx) {
    check_contract(x.dim(0) >= 1, "spatial_encoder: empty frame");
    Tensor<S> h = x;
    for (const auto& layer : layers) h = att_layer(h, h, h, h, layer, ctx);
    return h;
}

// ---- frame encoding -----------------------------------------------------------

// Returns the eta x d encoding matrix for non-learned kinds. Learned
// encodings are parameters registered by the model.
template <typename S>
Tensor<S> sinusoidal_encoding(std::size_t eta, std::size_t d) {
    std::vector<S> data(eta * d);
    for (std::size_t slot = 0; slot < eta; ++slot) {
        const double pos = static_cast<double>(slot);
        for (std::size_t i = 0; i < d; ++i) {
            const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d);
            const double angle = pos / std::pow(10000.0, exponent);
            data[slot * d + i] = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    }
    return Tensor<S>({eta, d}, std::move(data));
}

// ---- sliding windows ------------------------------------------------------------

// Entry bookkeeping: every flattened row within a window remembers its
// (frame, pair) origin and slot, so the earliest-window selection is exact.
struct WindowBatch {
    std::size_t start = 0;    // first frame index (0-based) in the window
    std::size_t n_slots = 0;  // eta, or T when T < eta
};

// Stride-1 sliding windows; T >= eta gives T-eta+1 windows, shorter videos
// collapse to a single window over all frames.
inline std::vector<WindowBatch> make_windows(std::size_t n_frames, std::size_t eta) {
    check_contract(n_frames >= 1, "make_windows: empty video");
    check_contract(eta >= 1, "make_windows: window size must be >= 1");
    std::vector<WindowBatch> out;
    if (n_frames < eta) {
        out.push_back({0, n_frames});
        return out;
    }
    for (std::size_t i = 0; i + eta <= n_frames; ++i) out.push_back({i, eta});
    return out;
}

// The window whose output supplies frame f: the earliest window containing f.
inline std::size_t earliest_window(std::size_t frame, std::size_t eta, std::size_t n_windows) {
    const std::size_t w = frame + 1 > eta ? frame + 1 - eta : 0;
    return std::min(w, n_windows - 1);
}

// Runs the decoder stack over every window. `frame_entries[f]` is the
// (possibly zero-row) K(f) x D tensor for frame f; empty frames are
// represented by undefined tensors and skipped. Returns one output tensor per
// window, rows ordered frame-major (all entries of the window's first frame,
// then the next, ...).
template <typename S>
std::vector<Tensor<S>> temporal_decoder(const std::vector<Tensor<S>>& frame_entries,
                                        const std::vector<WindowBatch>& windows, const Tensor<S>& encodings,
                                        EncodingKind kind, bool encoding_every_layer,
                                        const std::vector<AttLayerParams<S>>& layers, DropoutCtx& ctx) {
    check_contract(!windows.empty(), "temporal_decoder: no windows");
    std::vector<Tensor<S>> outputs(windows.size());
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const auto& w = windows[wi];
        std::vector<Tensor<S>> parts;
        std::vector<std::size_t> slot_of_row;
        for (std::size_t s = 0; s < w.n_slots; ++s) {
            const auto& entries = frame_entries[w.start + s];
            if (!entries.defined() || entries.dim(0) == 0) continue;
            parts.push_back(entries);
            for (std::size_t r = 0; r < entries.dim(0); ++r) slot_of_row.push_back(s);
        }
        if (parts.empty()) continue;  // window with zero entries is skipped
        Tensor<S> z = parts.size() == 1 ? parts[0] : concat_rows(parts);
        for (std::size_t li = 0; li < layers.size(); ++li) {
            Tensor<S> qk = z;
            if (kind != EncodingKind::none && (li == 0 || encoding_every_layer)) {
                qk = add(z, gather_rows(encodings, slot_of_row));
            }
            z = att_layer(qk, qk, z, z, layers[li], ctx);
        }
        outputs[wi] = z;
    }
    return outputs;
}

// Picks each frame's representation from the earliest window containing it.
// Output: per frame, a K(f) x D tensor (undefined for empty frames).
template <typename S>
std::vector<Tensor<S>> select_final(const std::vector<Tensor<S>>& frame_entries,
                                    const std::vector<WindowBatch>& windows,
                                    const std::vector<Tensor<S>>& window_outputs) {
    const std::size_t T = frame_entries.size();
    std::vector<Tensor<S>> out(T);
    for (std::size_t f = 0; f < T; ++f) {
        if (!frame_entries[f].defined() || frame_entries[f].dim(0) == 0) continue;
        const std::size_t eta = windows[0].n_slots;
        const std::size_t wi = earliest_window(f, eta, windows.size());
        const auto& w = windows[wi];
        check_contract(f >= w.start && f < w.start + w.n_slots, "select_final: frame not inside its window");
        std::size_t offset = 0;
        for (std::size_t s = w.start; s < f; ++s)
            if (frame_entries[s].defined()) offset += frame_entries[s].dim(0);
        const std::size_t k = frame_entries[f].dim(0);
        std::vector<std::size_t> rows(k);
        for (std::size_t r = 0; r < k; ++r) rows[r] = offset + r;
        check_contract(window_outputs[wi].defined(), "select_final: selected window was skipped");
        out[f] = gather_rows(window_outputs[wi], rows);
    }
    return out;
}

}  // namespace sttran
