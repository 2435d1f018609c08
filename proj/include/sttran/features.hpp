// Relationship representation: candidate pairing, the box-mask conv pathway,
// and the concatenated pair feature
//   x = < W_s v_sub, W_o v_obj, W_u flatten(u + f_box(b_sub, b_obj)), s_sub, s_obj >.
#pragma once

#include <vector>

#include "sttran/config.hpp"
#include "sttran/detections.hpp"
#include "sttran/geometry.hpp"
#include "sttran/ops.hpp"
#include "sttran/tensor.hpp"

namespace sttran {

// Emits candidate (subject, object) pairs in a canonical deterministic order.
// person_centric: one pair per (person, non-person object); full: all ordered
// pairs. Class identity comes from gt labels in predcls/sgcls and from the
// detector distribution in sgdet.
inline std::vector<PairKey> candidate_pairs(const FrameDetections& frame, PairPolicy policy, TaskMode mode,
                                            std::size_t person_class) {
    std::vector<PairKey> out;
    const std::size_t n = frame.objects.size();
    if (policy == PairPolicy::full) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) out.emplace_back(i, j);
        return out;
    }
    auto is_person = [&](const DetectedObject& d) {
        if (mode == TaskMode::sgdet) return d.argmax_class() == person_class;
        return d.gt_class >= 0 && static_cast<std::size_t>(d.gt_class) == person_class;
    };
    std::vector<bool> person(n);
    bool any_person = false;
    for (std::size_t i = 0; i < n; ++i) {
        person[i] = is_person(frame.objects[i]);
        any_person = any_person || person[i];
    }
    if (!any_person) {
        log_debug("candidate_pairs: frame without person, emitting no pairs");
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!person[i]) continue;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && !person[j]) out.emplace_back(i, j);
    }
    return out;
}

// Learned two-conv stack turning the 2 x grid x grid binary mask into a
// union-shaped feature map (kernel 7 then 3; strides from config).
template <typename S>
struct FBoxParams {
    Tensor<S> w1, b1, w2, b2;
    std::size_t stride1 = 2, stride2 = 4, pad2 = 0;
};

template <typename S>
Tensor<S> box_location_features(const BoundingBox& sub, const BoundingBox& obj, double frame_w, double frame_h,
                                const FBoxParams<S>& params, std::size_t grid) {
    bool degenerate_sub = false, degenerate_obj = false;
    const auto sub_mask = rasterize_box_mask(sub, frame_w, frame_h, grid, &degenerate_sub);
    const auto obj_mask = rasterize_box_mask(obj, frame_w, frame_h, grid, &degenerate_obj);
    if (degenerate_sub || degenerate_obj) log_warn("box_location_features: degenerate box, using nearest cell");

    std::vector<S> mask(2 * grid * grid);
    for (std::size_t i = 0; i < grid * grid; ++i) {
        mask[i] = static_cast<S>(sub_mask[i]);
        mask[grid * grid + i] = static_cast<S>(obj_mask[i]);
    }
    Tensor<S> x({2, grid, grid}, std::move(mask));
    Tensor<S> h = relu(conv2d(x, params.w1, params.b1, params.stride1, 0));
    return conv2d(h, params.w2, params.b2, params.stride2, params.pad2);
}

template <typename S>
struct RelFeatParams {
    Tensor<S> w_s, w_o, w_u;      // compression matrices (bias-free)
    FBoxParams<S> fbox;
    Tensor<S> semantic_table;     // C x D_s buffer
};

// Looks up the semantic class used for embedding rows: ground truth in
// predcls/sgcls, detector argmax in sgdet.
inline std::size_t semantic_class(const DetectedObject& d, TaskMode mode) {
    if (mode == TaskMode::predcls || mode == TaskMode::sgcls) {
        check_contract(d.gt_class >= 0, "semantic_class: ground-truth class required in predcls/sgcls");
        return static_cast<std::size_t>(d.gt_class);
    }
    return d.argmax_class();
}

// Batched Eq.-style representation for one frame: returns a [K x d_model]
// tensor whose rows align with `pairs`.
template <typename S>
Tensor<S> assemble_representations(const FrameDetections& frame, const std::vector<PairKey>& pairs,
                                   const RelFeatParams<S>& params, const ModelConfig& cfg, TaskMode mode) {
    check_contract(!pairs.empty(), "assemble_representations: no pairs");
    const std::size_t K = pairs.size();
    const std::size_t Dv = cfg.visual_dim;

    std::vector<S> sub_vis(K * Dv), obj_vis(K * Dv);
    std::vector<std::size_t> sub_cls(K), obj_cls(K);
    std::vector<Tensor<S>> union_rows;
    union_rows.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        const auto [si, oi] = pairs[k];
        check_contract(si < frame.objects.size() && oi < frame.objects.size(),
                       "assemble_representations: pair index out of range");
        const auto& sub = frame.objects[si];
        const auto& obj = frame.objects[oi];
        if (sub.visual.size() != Dv || obj.visual.size() != Dv)
            throw DimensionError("assemble_representations: visual feature size " +
                                 std::to_string(sub.visual.size()) + " does not match configured " +
                                 std::to_string(Dv));
        for (std::size_t d = 0; d < Dv; ++d) {
            sub_vis[k * Dv + d] = static_cast<S>(sub.visual[d]);
            obj_vis[k * Dv + d] = static_cast<S>(obj.visual[d]);
        }
        sub_cls[k] = semantic_class(sub, mode);
        obj_cls[k] = semantic_class(obj, mode);

        auto it = frame.union_maps.find(pairs[k]);
        check_contract(it != frame.union_maps.end(), "assemble_representations: missing union map for pair");
        if (it->second.size() != cfg.union_flat())
            throw DimensionError("assemble_representations: union map size " + std::to_string(it->second.size()) +
                                 " does not match configured " + std::to_string(cfg.union_flat()));
        std::vector<S> umap(it->second.begin(), it->second.end());
        Tensor<S> u({cfg.union_channels, cfg.union_size, cfg.union_size}, std::move(umap));
        Tensor<S> fb = box_location_features(sub.box, obj.box, frame.frame_w, frame.frame_h, params.fbox,
                                             cfg.mask_grid);
        union_rows.push_back(reshape(add(u, fb), {1, cfg.union_flat()}));
    }

    Tensor<S> sub_c = matmul(Tensor<S>({K, Dv}, std::move(sub_vis)), params.w_s);
    Tensor<S> obj_c = matmul(Tensor<S>({K, Dv}, std::move(obj_vis)), params.w_o);
    Tensor<S> uni_c = matmul(concat_rows(union_rows), params.w_u);
    Tensor<S> sem_s = gather_rows(params.semantic_table, sub_cls);
    Tensor<S> sem_o = gather_rows(params.semantic_table, obj_cls);
    Tensor<S> x = concat_cols<S>({sub_c, obj_c, uni_c, sem_s, sem_o});
    check_contract(x.dim(1) == cfg.d_model, "assemble_representations: concat width " + std::to_string(x.dim(1)) +
                                                " != d_model " + std::to_string(cfg.d_model));
    return x;
}

}  // namespace sttran
