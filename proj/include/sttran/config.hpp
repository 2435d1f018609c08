// Model/run configuration: presets, flat key=value config files, validation.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sttran/common.hpp"

namespace sttran {

enum class TaskMode { predcls, sgcls, sgdet };
enum class PairPolicy { person_centric, full };
enum class EncodingKind { learned, sinusoidal, none };
enum class StrategyKind { with_constraint, semi_constraint, no_constraint };
enum class Precision { f32, f64 };

inline std::string to_string(TaskMode m) {
    switch (m) {
        case TaskMode::predcls: return "predcls";
        case TaskMode::sgcls: return "sgcls";
        default: return "sgdet";
    }
}
inline std::string to_string(StrategyKind s) {
    switch (s) {
        case StrategyKind::with_constraint: return "with";
        case StrategyKind::semi_constraint: return "semi";
        default: return "no";
    }
}
inline std::string to_string(EncodingKind k) {
    switch (k) {
        case EncodingKind::learned: return "learned";
        case EncodingKind::sinusoidal: return "sinusoidal";
        default: return "none";
    }
}

inline TaskMode parse_task_mode(const std::string& s) {
    if (s == "predcls") return TaskMode::predcls;
    if (s == "sgcls") return TaskMode::sgcls;
    if (s == "sgdet") return TaskMode::sgdet;
    throw ConfigError("unknown mode: " + s + " (expected predcls|sgcls|sgdet)");
}
inline StrategyKind parse_strategy(const std::string& s) {
    if (s == "with") return StrategyKind::with_constraint;
    if (s == "semi") return StrategyKind::semi_constraint;
    if (s == "no") return StrategyKind::no_constraint;
    throw ConfigError("unknown strategy: " + s + " (expected with|semi|no)");
}
inline EncodingKind parse_encoding(const std::string& s) {
    if (s == "learned") return EncodingKind::learned;
    if (s == "sinusoidal") return EncodingKind::sinusoidal;
    if (s == "none") return EncodingKind::none;
    throw ConfigError("unknown frame_encoding: " + s + " (expected learned|sinusoidal|none)");
}

struct ModelConfig {
    std::string preset = "desk";
    Precision precision = Precision::f32;
    TaskMode mode = TaskMode::predcls;
    PairPolicy pair_policy = PairPolicy::person_centric;

    // transformer
    std::size_t d_model = 128;
    std::size_t n_heads = 4;
    std::size_t enc_layers = 1;
    std::size_t dec_layers = 2;
    std::size_t ffn_dim = 256;
    double dropout = 0.0;
    std::size_t window_size = 2;  // eta
    std::size_t window_stride = 1;
    EncodingKind frame_encoding = EncodingKind::learned;
    bool encoding_every_layer = true;

    // relationship representation
    std::size_t visual_dim = 64;       // D_v
    std::size_t semantic_dim = 16;     // D_s
    std::size_t compress_dim = 32;     // output of W_s / W_o / W_u
    std::size_t union_channels = 8;    // C_u
    std::size_t union_size = 3;        // S
    std::size_t mask_grid = 27;        // binary mask resolution
    std::size_t fbox_mid_channels = 4;
    std::size_t fbox_stride1 = 2;
    std::size_t fbox_stride2 = 4;
    std::size_t fbox_pad2 = 0;

    // vocabulary sizes (names come from the vocabulary file)
    std::size_t object_classes = 6;  // C, including person, excluding background
    std::size_t n_attention = 2;
    std::size_t n_spatial = 3;
    std::size_t n_contact = 4;

    // object classifier
    std::size_t obj_hidden = 32;
    std::size_t pos_embed_dim = 16;
    double bn_momentum = 0.1;

    // strategies / evaluation
    double semi_threshold = 0.9;
    std::vector<std::size_t> recall_ks = {10, 20, 50};
    double nms_iou = 0.4;
    double match_iou = 0.5;
    double min_box_edge = 16.0;

    // training
    double lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    double clip_norm = 5.0;
    std::uint64_t seed = 7;
    std::size_t steps = 2000;
    std::size_t checkpoint_every = 100;
    std::string log_level = "info";

    std::size_t union_flat() const { return union_channels * union_size * union_size; }
    std::size_t total_predicates() const { return n_attention + n_spatial + n_contact; }
    std::size_t obj_concat_dim() const { return visual_dim + semantic_dim + pos_embed_dim; }
};

inline ModelConfig desk_preset() { return ModelConfig{}; }

inline ModelConfig paper_preset() {
    ModelConfig c;
    c.preset = "paper";
    c.d_model = 1936;
    c.n_heads = 8;
    c.enc_layers = 1;
    c.dec_layers = 3;
    c.ffn_dim = 2048;
    c.dropout = 0.1;
    c.window_size = 2;
    c.window_stride = 1;
    c.visual_dim = 2048;
    c.semantic_dim = 200;
    c.compress_dim = 512;
    c.union_channels = 256;
    c.union_size = 7;
    c.fbox_mid_channels = 64;
    c.fbox_stride1 = 3;  // 27 -> 7 with kernel 7
    c.fbox_stride2 = 1;  // 7 -> 7 with kernel 3, pad 1
    c.fbox_pad2 = 1;
    c.object_classes = 36;
    c.n_attention = 3;
    c.n_spatial = 6;
    c.n_contact = 17;
    c.obj_hidden = 1024;
    c.pos_embed_dim = 128;
    c.lr = 1e-5;
    c.steps = 0;  // full-scale training is opt-in
    return c;
}

inline ModelConfig make_preset(const std::string& name) {
    if (name == "desk") return desk_preset();
    if (name == "paper") return paper_preset();
    throw ConfigError("unknown preset: " + name + " (expected desk|paper)");
}

// Rejects any setting that violates a type invariant before any computation.
inline void validate(const ModelConfig& c) {
    auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
    if (c.d_model == 0 || c.n_heads == 0) fail("d_model and n_heads must be positive");
    if (c.d_model % c.n_heads != 0)
        fail("d_model (" + std::to_string(c.d_model) + ") not divisible by n_heads (" + std::to_string(c.n_heads) +
             ")");
    if (c.d_model != 3 * c.compress_dim + 2 * c.semantic_dim)
        fail("d_model (" + std::to_string(c.d_model) + ") must equal 3*compress_dim + 2*semantic_dim (" +
             std::to_string(3 * c.compress_dim + 2 * c.semantic_dim) + ")");
    if (c.window_size < 1) fail("window_size must be >= 1");
    if (c.window_stride != 1) fail("window_stride must be 1 (exposed but fixed at desk scale)");
    if (c.dropout < 0.0 || c.dropout >= 1.0) fail("dropout must be in [0,1)");
    if (c.semi_threshold <= 0.0 || c.semi_threshold >= 1.0) fail("semi_threshold must be in (0,1)");
    if (c.recall_ks.empty()) fail("recall_ks must not be empty");
    for (std::size_t k : c.recall_ks)
        if (k == 0) fail("recall K values must be >= 1");
    if (c.object_classes < 2) fail("need at least two object classes (person + one object)");
    if (c.n_attention == 0 || c.n_spatial == 0 || c.n_contact == 0) fail("all predicate types need >= 1 class");
    if (c.mask_grid < 2) fail("mask_grid must be >= 2");
    // the two-conv stack must land exactly on union_size
    const std::size_t k1 = 7, k2 = 3;
    if (c.mask_grid < k1) fail("mask_grid smaller than first f_box kernel");
    const std::size_t mid = (c.mask_grid - k1) / c.fbox_stride1 + 1;
    if (mid + 2 * c.fbox_pad2 < k2) fail("f_box intermediate grid smaller than second kernel");
    const std::size_t out = (mid + 2 * c.fbox_pad2 - k2) / c.fbox_stride2 + 1;
    if (out != c.union_size)
        fail("f_box conv stack produces " + std::to_string(out) + "x" + std::to_string(out) + ", expected union_size " +
             std::to_string(c.union_size));
    if (c.lr <= 0.0) fail("lr must be positive");
    if (c.clip_norm <= 0.0) fail("clip_norm must be positive");
}

// ---- flat key=value config files ---------------------------------------------

inline std::map<std::string, std::string> parse_kv_text(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline void apply_config_entry(ModelConfig& c, const std::string& key, const std::string& value) {
    auto as_size = [&](const std::string& v) -> std::size_t {
        try {
            return static_cast<std::size_t>(std::stoull(v));
        } catch (...) {
            throw ConfigError("config key '" + key + "': not an integer: " + v);
        }
    };
    auto as_double = [&](const std::string& v) -> double {
        try {
            return std::stod(v);
        } catch (...) {
            throw ConfigError("config key '" + key + "': not a number: " + v);
        }
    };
    auto as_bool = [&](const std::string& v) -> bool {
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw ConfigError("config key '" + key + "': not a bool: " + v);
    };

    if (key == "preset") {
        const std::string keep_level = c.log_level;
        c = make_preset(value);
        c.log_level = keep_level;
    } else if (key == "precision") {
        if (value == "f32") c.precision = Precision::f32;
        else if (value == "f64") c.precision = Precision::f64;
        else throw ConfigError("precision must be f32|f64");
    } else if (key == "mode") c.mode = parse_task_mode(value);
    else if (key == "pair_policy") {
        if (value == "person_centric") c.pair_policy = PairPolicy::person_centric;
        else if (value == "full") c.pair_policy = PairPolicy::full;
        else throw ConfigError("pair_policy must be person_centric|full");
    } else if (key == "d_model") c.d_model = as_size(value);
    else if (key == "n_heads") c.n_heads = as_size(value);
    else if (key == "enc_layers") c.enc_layers = as_size(value);
    else if (key == "dec_layers") c.dec_layers = as_size(value);
    else if (key == "ffn_dim") c.ffn_dim = as_size(value);
    else if (key == "dropout") c.dropout = as_double(value);
    else if (key == "window_size") c.window_size = as_size(value);
    else if (key == "window_stride") c.window_stride = as_size(value);
    else if (key == "frame_encoding") c.frame_encoding = parse_encoding(value);
    else if (key == "encoding_every_layer") c.encoding_every_layer = as_bool(value);
    else if (key == "visual_dim") c.visual_dim = as_size(value);
    else if (key == "semantic_dim") c.semantic_dim = as_size(value);
    else if (key == "compress_dim") c.compress_dim = as_size(value);
    else if (key == "union_channels") c.union_channels = as_size(value);
    else if (key == "union_size") c.union_size = as_size(value);
    else if (key == "mask_grid") c.mask_grid = as_size(value);
    else if (key == "fbox_mid_channels") c.fbox_mid_channels = as_size(value);
    else if (key == "fbox_stride1") c.fbox_stride1 = as_size(value);
    else if (key == "fbox_stride2") c.fbox_stride2 = as_size(value);
    else if (key == "fbox_pad2") c.fbox_pad2 = as_size(value);
    else if (key == "object_classes") c.object_classes = as_size(value);
    else if (key == "n_attention") c.n_attention = as_size(value);
    else if (key == "n_spatial") c.n_spatial = as_size(value);
    else if (key == "n_contact") c.n_contact = as_size(value);
    else if (key == "obj_hidden") c.obj_hidden = as_size(value);
    else if (key == "pos_embed_dim") c.pos_embed_dim = as_size(value);
    else if (key == "bn_momentum") c.bn_momentum = as_double(value);
    else if (key == "semi_threshold") c.semi_threshold = as_double(value);
    else if (key == "recall_ks") {
        c.recall_ks.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) c.recall_ks.push_back(as_size(tok));
    } else if (key == "nms_iou") c.nms_iou = as_double(value);
    else if (key == "match_iou") c.match_iou = as_double(value);
    else if (key == "min_box_edge") c.min_box_edge = as_double(value);
    else if (key == "lr") c.lr = as_double(value);
    else if (key == "adam_beta1") c.adam_beta1 = as_double(value);
    else if (key == "adam_beta2") c.adam_beta2 = as_double(value);
    else if (key == "adam_eps") c.adam_eps = as_double(value);
    else if (key == "weight_decay") c.weight_decay = as_double(value);
    else if (key == "clip_norm") c.clip_norm = as_double(value);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(as_size(value));
    else if (key == "steps") c.steps = as_size(value);
    else if (key == "checkpoint_every") c.checkpoint_every = as_size(value);
    else if (key == "log_level") c.log_level = value;
    else throw ConfigError("unknown config key: " + key);
}

// `preset` is applied first (resetting defaults), then the remaining keys in
// file order override it.
inline ModelConfig load_config(std::istream& in) {
    ModelConfig c;
    auto kv = parse_kv_text(in);
    auto preset_it = kv.find("preset");
    if (preset_it != kv.end()) c = make_preset(preset_it->second);
    for (const auto& [k, v] : kv)
        if (k != "preset") apply_config_entry(c, k, v);
    return c;
}

inline ModelConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return load_config(in);
}

// Effective-config echo; reading it back reproduces the config.
inline std::string dump_config(const ModelConfig& c) {
    std::ostringstream os;
    os << "preset = " << c.preset << "\n";
    os << "precision = " << (c.precision == Precision::f32 ? "f32" : "f64") << "\n";
    os << "mode = " << to_string(c.mode) << "\n";
    os << "pair_policy = " << (c.pair_policy == PairPolicy::person_centric ? "person_centric" : "full") << "\n";
    os << "d_model = " << c.d_model << "\n";
    os << "n_heads = " << c.n_heads << "\n";
    os << "enc_layers = " << c.enc_layers << "\n";
    os << "dec_layers = " << c.dec_layers << "\n";
    os << "ffn_dim = " << c.ffn_dim << "\n";
    os << "dropout = " << c.dropout << "\n";
    os << "window_size = " << c.window_size << "\n";
    os << "window_stride = " << c.window_stride << "\n";
    os << "frame_encoding = " << to_string(c.frame_encoding) << "\n";
    os << "encoding_every_layer = " << (c.encoding_every_layer ? "true" : "false") << "\n";
    os << "visual_dim = " << c.visual_dim << "\n";
    os << "semantic_dim = " << c.semantic_dim << "\n";
    os << "compress_dim = " << c.compress_dim << "\n";
    os << "union_channels = " << c.union_channels << "\n";
    os << "union_size = " << c.union_size << "\n";
    os << "mask_grid = " << c.mask_grid << "\n";
    os << "fbox_mid_channels = " << c.fbox_mid_channels << "\n";
    os << "fbox_stride1 = " << c.fbox_stride1 << "\n";
    os << "fbox_stride2 = " << c.fbox_stride2 << "\n";
    os << "fbox_pad2 = " << c.fbox_pad2 << "\n";
    os << "object_classes = " << c.object_classes << "\n";
    os << "n_attention = " << c.n_attention << "\n";
    os << "n_spatial = " << c.n_spatial << "\n";
    os << "n_contact = " << c.n_contact << "\n";
    os << "obj_hidden = " << c.obj_hidden << "\n";
    os << "pos_embed_dim = " << c.pos_embed_dim << "\n";
    os << "bn_momentum = " << c.bn_momentum << "\n";
    os << "semi_threshold = " << c.semi_threshold << "\n";
    os << "recall_ks = ";
    for (std::size_t i = 0; i < c.recall_ks.size(); ++i) os << (i ? "," : "") << c.recall_ks[i];
    os << "\n";
    os << "nms_iou = " << c.nms_iou << "\n";
    os << "match_iou = " << c.match_iou << "\n";
    os << "min_box_edge = " << c.min_box_edge << "\n";
    os << "lr = " << c.lr << "\n";
    os << "adam_beta1 = " << c.adam_beta1 << "\n";
    os << "adam_beta2 = " << c.adam_beta2 << "\n";
    os << "adam_eps = " << c.adam_eps << "\n";
    os << "weight_decay = " << c.weight_decay << "\n";
    os << "clip_norm = " << c.clip_norm << "\n";
    os << "seed = " << c.seed << "\n";
    os << "steps = " << c.steps << "\n";
    os << "checkpoint_every = " << c.checkpoint_every << "\n";
    os << "log_level = " << c.log_level << "\n";
    return os.str();
}

inline LogLevel parse_log_level(const std::string& s) {
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    if (s == "warn") return LogLevel::warn;
    if (s == "error") return LogLevel::error;
    if (s == "silent") return LogLevel::silent;
    throw ConfigError("unknown log_level: " + s);
}

}  // namespace sttran
