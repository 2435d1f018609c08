// PredCLS / SGCLS / SGDET evaluation: triplet matching, Recall@K, predicate
// average precision, NMS, and threshold sweeps.
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sttran/config.hpp"
#include "sttran/detections.hpp"
#include "sttran/graphgen.hpp"
#include "sttran/vocab.hpp"

namespace sttran {

// ---- ingestion-side filtering ----------------------------------------------------

// Greedy per-class suppression: keep the highest score, drop overlaps
// strictly above the threshold, repeat. Classes come from the detector
// distribution argmax.
inline std::vector<std::size_t> nms_per_class(const std::vector<DetectedObject>& dets, double iou_threshold) {
    std::vector<std::size_t> order(dets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
        return a < b;
    });
    std::vector<bool> removed(dets.size(), false);
    std::vector<std::size_t> kept;
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const std::size_t i = order[oi];
        if (removed[i]) continue;
        kept.push_back(i);
        for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
            const std::size_t j = order[oj];
            if (removed[j] || dets[i].argmax_class() != dets[j].argmax_class()) continue;
            if (iou(dets[i].box, dets[j].box) > iou_threshold) removed[j] = true;
        }
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

// ---- ground-truth triplets ----------------------------------------------------------

struct GtTriplet {
    std::size_t subject = 0, object = 0;  // gt object indices
    std::size_t subject_class = 0, object_class = 0;
    PredicateType type = PredicateType::attention;
    std::size_t predicate = 0;
    BoundingBox subject_box, object_box;
};

inline std::vector<GtTriplet> build_gt_triplets(const FrameGroundTruth& gt) {
    std::vector<GtTriplet> out;
    for (const auto& rel : gt.relationships) {
        check_contract(rel.subject < gt.objects.size() && rel.object < gt.objects.size(),
                       "ground-truth relationship references a missing object");
        auto emit = [&](PredicateType type, const std::vector<std::size_t>& ids) {
            for (std::size_t pid : ids) {
                GtTriplet t;
                t.subject = rel.subject;
                t.object = rel.object;
                t.subject_class = gt.objects[rel.subject].cls;
                t.object_class = gt.objects[rel.object].cls;
                t.type = type;
                t.predicate = pid;
                t.subject_box = gt.objects[rel.subject].box;
                t.object_box = gt.objects[rel.object].box;
                out.push_back(t);
            }
        };
        emit(PredicateType::attention, rel.attention);
        emit(PredicateType::spatial, rel.spatial);
        emit(PredicateType::contact, rel.contact);
    }
    return out;
}

// ---- matching -------------------------------------------------------------------------

// Match of one prediction against the unconsumed ground truth. Classes and
// predicate must agree; sgdet additionally requires both boxes to reach the
// IoU threshold, while predcls/sgcls require the gt-aligned pair identity.
inline std::optional<std::size_t> match_triplet(const Triplet& pred, const std::vector<GtTriplet>& gts,
                                                const std::vector<bool>& consumed, TaskMode mode,
                                                double iou_threshold) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (consumed[g]) continue;
        const auto& gt = gts[g];
        if (gt.type != pred.type || gt.predicate != pred.predicate) continue;
        if (gt.subject_class != pred.subject_class || gt.object_class != pred.object_class) continue;
        if (mode == TaskMode::sgdet) {
            if (iou(pred.subject_box, gt.subject_box) < iou_threshold) continue;
            if (iou(pred.object_box, gt.object_box) < iou_threshold) continue;
        } else {
            if (pred.subject_gt < 0 || pred.object_gt < 0) continue;
            if (static_cast<std::size_t>(pred.subject_gt) != gt.subject ||
                static_cast<std::size_t>(pred.object_gt) != gt.object)
                continue;
        }
        return g;
    }
    return std::nullopt;
}

// Greedy in rank order; each gt triplet is consumable once.
inline std::size_t count_matches(const std::vector<Triplet>& ranked_topk, const std::vector<GtTriplet>& gts,
                                 TaskMode mode, double iou_threshold) {
    std::vector<bool> consumed(gts.size(), false);
    std::size_t matched = 0;
    for (const auto& pred : ranked_topk) {
        auto g = match_triplet(pred, gts, consumed, mode, iou_threshold);
        if (g) {
            consumed[*g] = true;
            ++matched;
        }
    }
    return matched;
}

// Per-frame recall = |matched gt among top-K| / |gt|; the dataset value is
// the mean over frames with at least one gt triplet.
struct RecallAccumulator {
    double sum = 0.0;
    std::size_t frames = 0;
    std::size_t skipped = 0;

    void add_frame(const std::vector<Triplet>& ranked, const std::vector<GtTriplet>& gts, std::size_t k,
                   TaskMode mode, double iou_threshold) {
        if (gts.empty()) {
            ++skipped;
            return;
        }
        const auto top = topk(ranked, k);
        sum += static_cast<double>(count_matches(top, gts, mode, iou_threshold)) / static_cast<double>(gts.size());
        ++frames;
    }

    std::optional<double> value() const {
        if (frames == 0) return std::nullopt;
        return sum / static_cast<double>(frames);
    }
};

inline std::optional<double> recall_at_k(const std::vector<std::vector<Triplet>>& ranked_per_frame,
                                         const std::vector<std::vector<GtTriplet>>& gts_per_frame, std::size_t k,
                                         TaskMode mode, double iou_threshold = 0.5) {
    check_contract(ranked_per_frame.size() == gts_per_frame.size(), "recall_at_k: frame count mismatch");
    RecallAccumulator acc;
    for (std::size_t f = 0; f < ranked_per_frame.size(); ++f)
        acc.add_frame(ranked_per_frame[f], gts_per_frame[f], k, mode, iou_threshold);
    return acc.value();
}

// ---- predicate average precision ---------------------------------------------------------

// AP = mean over positives of precision at that positive's rank; samples
// ranked by score descending with index-order tie breaking. No positives ->
// absent.
inline std::optional<double> average_precision(const std::vector<std::pair<double, bool>>& samples) {
    std::size_t n_pos = 0;
    for (const auto& s : samples) n_pos += s.second ? 1 : 0;
    if (n_pos == 0) return std::nullopt;
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return samples[a].first > samples[b].first;
    });
    double ap = 0.0;
    std::size_t seen_pos = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
        if (samples[order[r]].second) {
            ++seen_pos;
            ap += static_cast<double>(seen_pos) / static_cast<double>(r + 1);
        }
    }
    return ap / static_cast<double>(n_pos);
}

// Collects (score, is-annotated) samples per global predicate across frames;
// boxes are given, so every gt-aligned pair contributes one sample per
// predicate of each type.
inline std::map<std::size_t, std::vector<std::pair<double, bool>>> collect_ap_samples(
    const std::vector<FramePrediction>& frames, const std::vector<FrameGroundTruth>& gts, const Vocabulary& vocab) {
    check_contract(frames.size() == gts.size(), "collect_ap_samples: frame count mismatch");
    std::map<std::size_t, std::vector<std::pair<double, bool>>> samples;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        // annotated predicate sets keyed by gt pair
        std::map<PairKey, const GtRelationship*> ann;
        for (const auto& rel : gts[f].relationships) ann[{rel.subject, rel.object}] = &rel;
        for (const auto& pp : frames[f].pairs) {
            if (pp.subject_gt < 0 || pp.object_gt < 0) continue;
            const PairKey key{static_cast<std::size_t>(pp.subject_gt), static_cast<std::size_t>(pp.object_gt)};
            auto it = ann.find(key);
            const GtRelationship* rel = it == ann.end() ? nullptr : it->second;
            auto add = [&](PredicateType type, const std::vector<double>& conf) {
                for (std::size_t pid = 0; pid < conf.size(); ++pid) {
                    bool positive = false;
                    if (rel) {
                        const auto& ids = type == PredicateType::attention ? rel->attention
                                          : type == PredicateType::spatial ? rel->spatial
                                                                           : rel->contact;
                        positive = std::find(ids.begin(), ids.end(), pid) != ids.end();
                    }
                    samples[vocab.global_id(type, pid)].push_back({conf[pid], positive});
                }
            };
            add(PredicateType::attention, pp.att_conf);
            add(PredicateType::spatial, pp.spa_conf);
            add(PredicateType::contact, pp.con_conf);
        }
    }
    return samples;
}

// ---- report ---------------------------------------------------------------------------------

struct EvalCell {
    std::optional<double> recall;
    std::size_t frames = 0, skipped = 0;
};

struct EvalReport {
    // mode -> strategy -> K -> cell
    std::map<std::string, std::map<std::string, std::map<std::size_t, EvalCell>>> cells;
    std::map<std::string, double> ap_pred;              // predicate name -> AP
    std::vector<std::string> ap_skipped;                // predicates without positives
    std::map<std::string, std::vector<std::pair<double, std::optional<double>>>> sweeps;  // per mode
    double semi_threshold = 0.9;

    std::string format() const {
        std::ostringstream os;
        os.setf(std::ios::fixed);
        os.precision(4);
        os << "recall\n";
        os << "mode      strategy   K     R@K      frames  skipped\n";
        for (const auto& [mode, per_strategy] : cells)
            for (const auto& [strategy, per_k] : per_strategy)
                for (const auto& [k, cell] : per_k) {
                    os << mode;
                    for (std::size_t i = mode.size(); i < 10; ++i) os << ' ';
                    os << strategy;
                    for (std::size_t i = strategy.size(); i < 11; ++i) os << ' ';
                    std::string ks = std::to_string(k);
                    os << ks;
                    for (std::size_t i = ks.size(); i < 6; ++i) os << ' ';
                    if (cell.recall) os << *cell.recall;
                    else os << "n/a   ";
                    os << "   " << cell.frames << "       " << cell.skipped << "\n";
                }
        if (!ap_pred.empty() || !ap_skipped.empty()) {
            os << "\nap_pred (semi threshold = " << semi_threshold << ")\n";
            for (const auto& [name, ap] : ap_pred) {
                os << name;
                for (std::size_t i = name.size(); i < 24; ++i) os << ' ';
                os << ap << "\n";
            }
            for (const auto& name : ap_skipped) {
                os << name;
                for (std::size_t i = name.size(); i < 24; ++i) os << ' ';
                os << "no positives, skipped\n";
            }
        }
        for (const auto& [mode, curve] : sweeps) {
            os << "\nsemi threshold sweep (" << mode << ")\n";
            for (const auto& [theta, recall] : curve) {
                os << "theta=" << theta << "  R=";
                if (recall) os << *recall;
                else os << "n/a";
                os << "\n";
            }
        }
        return os.str();
    }
};

// Recall recomputed per threshold from cached confidences, without re-running
// the model.
inline std::vector<std::pair<double, std::optional<double>>> threshold_sweep(
    const std::vector<FramePrediction>& frames, const std::vector<std::vector<GtTriplet>>& gts,
    const std::vector<double>& thetas, std::size_t k, TaskMode mode, const Vocabulary& vocab,
    double iou_threshold = 0.5) {
    std::vector<std::pair<double, std::optional<double>>> curve;
    for (double theta : thetas) {
        StrategyConfig cfg;
        cfg.kind = StrategyKind::semi_constraint;
        cfg.threshold = theta;
        RecallAccumulator acc;
        for (std::size_t f = 0; f < frames.size(); ++f)
            acc.add_frame(apply_strategy(frames[f], cfg, vocab), gts[f], k, mode, iou_threshold);
        curve.push_back({theta, acc.value()});
    }
    return curve;
}

}  // namespace sttran
