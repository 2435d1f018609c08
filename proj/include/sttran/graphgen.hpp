// Turns per-pair predicate confidences into ranked scene-graph triplets under
// the three generation strategies.
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "sttran/common.hpp"
#include "sttran/detections.hpp"
#include "sttran/vocab.hpp"

namespace sttran {

// Model output for one candidate pair, free of tensors so evaluation and
// strategies are precision-agnostic.
struct PairPrediction {
    std::size_t subject_idx = 0, object_idx = 0;  // detection indices
    std::size_t subject_class = 0, object_class = 0;
    double subject_score = 1.0, object_score = 1.0;
    BoundingBox subject_box, object_box;
    int subject_gt = -1, object_gt = -1;  // gt object indices when boxes are gt-aligned
    std::vector<double> att_conf;  // softmax over the attention head
    std::vector<double> spa_conf;  // sigmoid per spatial predicate
    std::vector<double> con_conf;  // sigmoid per contact predicate

    const std::vector<double>& conf(PredicateType t) const {
        switch (t) {
            case PredicateType::attention: return att_conf;
            case PredicateType::spatial: return spa_conf;
            default: return con_conf;
        }
    }
};

struct FramePrediction {
    std::size_t frame_index = 0;
    std::vector<PairPrediction> pairs;
};

struct Triplet {
    std::size_t pair_index = 0;
    PredicateType type = PredicateType::attention;
    std::size_t predicate = 0;         // local id within its type
    std::size_t global_predicate = 0;  // attention, then spatial, then contact
    std::size_t subject_class = 0, object_class = 0;
    double s_sub = 1.0, s_p = 0.0, s_obj = 1.0, s_rel = 0.0;
    BoundingBox subject_box, object_box;
    int subject_gt = -1, object_gt = -1;
};

struct StrategyConfig {
    StrategyKind kind = StrategyKind::with_constraint;
    double threshold = 0.9;  // semi only, must be in (0,1)
    std::vector<std::size_t> ks = {10, 20, 50};
};

inline Triplet make_triplet(const PairPrediction& pp, std::size_t pair_index, PredicateType type, std::size_t pid,
                            double conf, const Vocabulary& vocab) {
    Triplet t;
    t.pair_index = pair_index;
    t.type = type;
    t.predicate = pid;
    t.global_predicate = vocab.global_id(type, pid);
    t.subject_class = pp.subject_class;
    t.object_class = pp.object_class;
    t.s_sub = pp.subject_score;
    t.s_p = conf;
    t.s_obj = pp.object_score;
    t.s_rel = t.s_sub * t.s_p * t.s_obj;
    t.subject_box = pp.subject_box;
    t.object_box = pp.object_box;
    t.subject_gt = pp.subject_gt;
    t.object_gt = pp.object_gt;
    return t;
}

// Every (pair, predicate) candidate with the multiplicative triplet score.
inline std::vector<Triplet> score_triplets(const FramePrediction& frame, const Vocabulary& vocab) {
    std::vector<Triplet> out;
    for (std::size_t k = 0; k < frame.pairs.size(); ++k) {
        const auto& pp = frame.pairs[k];
        for (PredicateType type : {PredicateType::attention, PredicateType::spatial, PredicateType::contact}) {
            const auto& conf = pp.conf(type);
            for (std::size_t pid = 0; pid < conf.size(); ++pid)
                out.push_back(make_triplet(pp, k, type, pid, conf[pid], vocab));
        }
    }
    return out;
}

// Deterministic total order: score descending, then pair index, then global
// predicate id.
inline void rank_triplets(std::vector<Triplet>& ts) {
    std::stable_sort(ts.begin(), ts.end(), [](const Triplet& a, const Triplet& b) {
        if (a.s_rel != b.s_rel) return a.s_rel > b.s_rel;
        if (a.pair_index != b.pair_index) return a.pair_index < b.pair_index;
        return a.global_predicate < b.global_predicate;
    });
}

inline std::size_t argmax_conf(const std::vector<double>& conf) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < conf.size(); ++i)
        if (conf[i] > conf[best]) best = i;
    return best;
}

// With: the argmax predicate per (pair, type). Semi: attention argmax plus
// every spatial/contact predicate strictly above the threshold. No: all
// candidates. Output ranked by the deterministic order above.
inline std::vector<Triplet> apply_strategy(const FramePrediction& frame, const StrategyConfig& cfg,
                                           const Vocabulary& vocab) {
    std::vector<Triplet> out;
    for (std::size_t k = 0; k < frame.pairs.size(); ++k) {
        const auto& pp = frame.pairs[k];
        for (PredicateType type : {PredicateType::attention, PredicateType::spatial, PredicateType::contact}) {
            const auto& conf = pp.conf(type);
            if (conf.empty()) continue;
            switch (cfg.kind) {
                case StrategyKind::with_constraint: {
                    const std::size_t pid = argmax_conf(conf);
                    out.push_back(make_triplet(pp, k, type, pid, conf[pid], vocab));
                    break;
                }
                case StrategyKind::semi_constraint: {
                    if (type == PredicateType::attention) {
                        const std::size_t pid = argmax_conf(conf);
                        out.push_back(make_triplet(pp, k, type, pid, conf[pid], vocab));
                    } else {
                        for (std::size_t pid = 0; pid < conf.size(); ++pid)
                            if (conf[pid] > cfg.threshold)  // strictly above
                                out.push_back(make_triplet(pp, k, type, pid, conf[pid], vocab));
                    }
                    break;
                }
                case StrategyKind::no_constraint: {
                    for (std::size_t pid = 0; pid < conf.size(); ++pid)
                        out.push_back(make_triplet(pp, k, type, pid, conf[pid], vocab));
                    break;
                }
            }
        }
    }
    rank_triplets(out);
    return out;
}

inline std::vector<Triplet> topk(const std::vector<Triplet>& ranked, std::size_t k) {
    check_contract(k >= 1, "topk: K must be >= 1");
    std::vector<Triplet> out(ranked.begin(), ranked.begin() + std::min(k, ranked.size()));
    return out;
}

}  // namespace sttran
