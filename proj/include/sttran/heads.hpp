// Predicate heads, the object classifier, and the training objective
// (multi-label margin per relationship type plus object cross entropy).
#pragma once

#include <vector>

#include "sttran/config.hpp"
#include "sttran/detections.hpp"
#include "sttran/ops.hpp"
#include "sttran/tensor.hpp"

namespace sttran {

template <typename S>
struct PredicateHeads {
    Tensor<S> w_att, b_att;
    Tensor<S> w_spa, b_spa;
    Tensor<S> w_con, b_con;
};

template <typename S>
struct PredicateLogits {
    Tensor<S> attention;  // K x n_attention
    Tensor<S> spatial;    // K x n_spatial
    Tensor<S> contact;    // K x n_contact
};

// Raw per-type logits; confidences are sigmoid(logit) for the margin loss and
// thresholding, softmax over the attention head for ranking.
template <typename S>
PredicateLogits<S> predicate_forward(const Tensor<S>& reps, const PredicateHeads<S>& heads) {
    return {linear(reps, heads.w_att, &heads.b_att), linear(reps, heads.w_spa, &heads.b_spa),
            linear(reps, heads.w_con, &heads.b_con)};
}

// Per pair and type: the annotated predicate set and its complement.
struct PredicateTargets {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
};

inline PredicateTargets make_targets(const std::vector<std::size_t>& annotated, std::size_t vocab_size) {
    PredicateTargets t;
    std::vector<bool> pos(vocab_size, false);
    for (std::size_t p : annotated) {
        check_contract(p < vocab_size, "predicate id " + std::to_string(p) + " out of vocabulary range " +
                                           std::to_string(vocab_size));
        if (!pos[p]) t.positives.push_back(p);
        pos[p] = true;
    }
    for (std::size_t q = 0; q < vocab_size; ++q)
        if (!pos[q]) t.negatives.push_back(q);
    return t;
}

// Sum over p in P+, q in P- of max(0, 1 - scores[p] + scores[q]).
template <typename S>
Tensor<S> margin_loss(const Tensor<S>& scores, const PredicateTargets& targets) {
    return multilabel_margin(scores, targets.positives, targets.negatives);
}

// ---- object classifier ------------------------------------------------------------

template <typename S>
struct ObjectClassifierParams {
    Tensor<S> w_e;            // C x D_s semantic map
    Tensor<S> pos_w, pos_b;   // 4 -> pos_embed_dim
    Tensor<S> fc1_w, fc1_b;   // concat -> hidden
    Tensor<S> bn_gain, bn_bias;
    Tensor<S> fc2_w, fc2_b;   // hidden -> C+1 (background last)
};

// concat(visual, dist * W_e, posFFN(normalized box)) -> fc1 -> ReLU -> BN ->
// fc2 -> softmax over C+1.
template <typename S>
Tensor<S> object_classifier(const FrameDetections& frame, const ObjectClassifierParams<S>& params,
                            BatchNormState<S>& bn_state, const ModelConfig& cfg, bool training) {
    const std::size_t n = frame.objects.size();
    check_contract(n >= 1, "object_classifier: no detections");
    std::vector<S> vis(n * cfg.visual_dim), dist(n * cfg.object_classes), boxf(n * 4);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& d = frame.objects[i];
        if (d.visual.size() != cfg.visual_dim || d.class_distribution.size() != cfg.object_classes)
            throw DimensionError("object_classifier: feature dims do not match config");
        for (std::size_t j = 0; j < cfg.visual_dim; ++j) vis[i * cfg.visual_dim + j] = static_cast<S>(d.visual[j]);
        for (std::size_t j = 0; j < cfg.object_classes; ++j)
            dist[i * cfg.object_classes + j] = static_cast<S>(d.class_distribution[j]);
        // box coordinates normalized by the frame size lie in [0,1]
        boxf[i * 4 + 0] = static_cast<S>(d.box.x1 / frame.frame_w);
        boxf[i * 4 + 1] = static_cast<S>(d.box.y1 / frame.frame_h);
        boxf[i * 4 + 2] = static_cast<S>(d.box.x2 / frame.frame_w);
        boxf[i * 4 + 3] = static_cast<S>(d.box.y2 / frame.frame_h);
    }
    Tensor<S> semantic = matmul(Tensor<S>({n, cfg.object_classes}, std::move(dist)), params.w_e);
    Tensor<S> position = relu(linear(Tensor<S>({n, 4}, std::move(boxf)), params.pos_w, &params.pos_b));
    Tensor<S> concat = concat_cols<S>({Tensor<S>({n, cfg.visual_dim}, std::move(vis)), semantic, position});
    Tensor<S> h = relu(linear(concat, params.fc1_w, &params.fc1_b));
    h = batch_norm(h, params.bn_gain, params.bn_bias, bn_state, training, static_cast<S>(cfg.bn_momentum));
    return linear(h, params.fc2_w, &params.fc2_b);  // logits over C+1
}

// ---- total objective ----------------------------------------------------------------

// One pair's annotation mapped onto the three heads.
struct PairAnnotation {
    PredicateTargets attention, spatial, contact;
};

// L = mean over pairs of (sum of per-type margin losses on sigmoid scores)
//   + mean cross entropy over objects (empty object batch contributes zero).
template <typename S>
Tensor<S> total_loss(const std::vector<PredicateLogits<S>>& frame_logits,
                     const std::vector<std::vector<int>>& pair_annotation_index,
                     const std::vector<PairAnnotation>& annotations,
                     const std::vector<Tensor<S>>& object_logits,
                     const std::vector<std::vector<std::size_t>>& object_targets) {
    std::vector<Tensor<S>> pair_losses;
    for (std::size_t f = 0; f < frame_logits.size(); ++f) {
        if (!frame_logits[f].attention.defined()) continue;
        Tensor<S> att_conf = sigmoid(frame_logits[f].attention);
        Tensor<S> spa_conf = sigmoid(frame_logits[f].spatial);
        Tensor<S> con_conf = sigmoid(frame_logits[f].contact);
        for (std::size_t k = 0; k < pair_annotation_index[f].size(); ++k) {
            const int ai = pair_annotation_index[f][k];
            if (ai < 0) continue;  // unannotated pair: no predicate supervision
            const auto& ann = annotations[static_cast<std::size_t>(ai)];
            std::vector<Tensor<S>> terms;
            terms.push_back(margin_loss(gather_rows(att_conf, {k}), ann.attention));
            terms.push_back(margin_loss(gather_rows(spa_conf, {k}), ann.spatial));
            terms.push_back(margin_loss(gather_rows(con_conf, {k}), ann.contact));
            pair_losses.push_back(sum_list(terms));
        }
    }

    Tensor<S> loss = Tensor<S>::scalar(S(0));
    if (!pair_losses.empty())
        loss = scale(sum_list(pair_losses), S(1) / static_cast<S>(pair_losses.size()));

    std::vector<Tensor<S>> ce_terms;
    std::size_t n_objects = 0;
    for (std::size_t f = 0; f < object_logits.size(); ++f) {
        if (!object_logits[f].defined()) continue;
        const std::size_t n = object_logits[f].dim(0);
        ce_terms.push_back(scale(cross_entropy_mean(object_logits[f], object_targets[f]), static_cast<S>(n)));
        n_objects += n;
    }
    if (n_objects > 0) {
        Tensor<S> ce = scale(sum_list(ce_terms), S(1) / static_cast<S>(n_objects));
        loss = pair_losses.empty() ? ce : add(loss, ce);
    }
    return loss;
}

}  // namespace sttran
