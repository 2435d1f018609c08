// Plain data carriers for detections, ground truth, and per-video samples.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sttran/geometry.hpp"

namespace sttran {

struct DetectedObject {
    BoundingBox box;
    std::vector<float> visual;              // D_v
    std::vector<float> class_distribution;  // simplex over C foreground classes
    double score = 1.0;
    int gt_index = -1;  // matched ground-truth object, -1 if unmatched
    int gt_class = -1;  // class of the matched gt object
    std::size_t source_index = 0;  // index before ingestion filters, for seeding

    std::size_t argmax_class() const {
        std::size_t best = 0;
        for (std::size_t i = 1; i < class_distribution.size(); ++i)
            if (class_distribution[i] > class_distribution[best]) best = i;
        return best;
    }
};

struct GtObject {
    std::size_t cls = 0;
    BoundingBox box;
};

// indices reference the frame's gt_objects
struct GtRelationship {
    std::size_t subject = 0;
    std::size_t object = 0;
    std::vector<std::size_t> attention;
    std::vector<std::size_t> spatial;
    std::vector<std::size_t> contact;
};

struct FrameGroundTruth {
    std::vector<GtObject> objects;
    std::vector<GtRelationship> relationships;
    bool has_relationships() const { return !relationships.empty(); }
};

using PairKey = std::pair<std::size_t, std::size_t>;  // (subject idx, object idx)

struct FrameDetections {
    double frame_w = 0, frame_h = 0;
    std::vector<DetectedObject> objects;
    // union feature maps (C_u*S*S floats) keyed by detection-index pairs
    std::map<PairKey, std::vector<float>> union_maps;
};

struct VideoFrame {
    std::size_t index = 0;  // 1-based position within the video
    FrameDetections detections;
    FrameGroundTruth gt;
};

struct VideoSample {
    std::string id;
    std::vector<VideoFrame> frames;
};

}  // namespace sttran
