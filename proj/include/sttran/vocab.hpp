// Relationship vocabulary: object class names plus the three predicate
// groups. Plain-text file, one name per line, bracketed section separators.
#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sttran/common.hpp"
#include "sttran/config.hpp"

namespace sttran {

enum class PredicateType { attention = 0, spatial = 1, contact = 2 };

inline const char* to_string(PredicateType t) {
    switch (t) {
        case PredicateType::attention: return "attention";
        case PredicateType::spatial: return "spatial";
        default: return "contact";
    }
}

struct Vocabulary {
    std::vector<std::string> objects;  // includes "person", excludes background
    std::vector<std::string> attention;
    std::vector<std::string> spatial;
    std::vector<std::string> contact;

    std::size_t person_id() const {
        for (std::size_t i = 0; i < objects.size(); ++i)
            if (objects[i] == "person") return i;
        throw DataError("vocabulary has no 'person' object class");
    }

    const std::vector<std::string>& predicates(PredicateType t) const {
        switch (t) {
            case PredicateType::attention: return attention;
            case PredicateType::spatial: return spatial;
            default: return contact;
        }
    }

    std::size_t predicate_count(PredicateType t) const { return predicates(t).size(); }
    std::size_t total_predicates() const { return attention.size() + spatial.size() + contact.size(); }

    // global predicate id: attention first, then spatial, then contact
    std::size_t global_id(PredicateType t, std::size_t local) const {
        switch (t) {
            case PredicateType::attention: return local;
            case PredicateType::spatial: return attention.size() + local;
            default: return attention.size() + spatial.size() + local;
        }
    }

    std::string predicate_name(PredicateType t, std::size_t local) const {
        const auto& v = predicates(t);
        check_contract(local < v.size(), "predicate id out of range");
        return v[local];
    }

    void check_config(const ModelConfig& c) const {
        if (objects.size() != c.object_classes || attention.size() != c.n_attention ||
            spatial.size() != c.n_spatial || contact.size() != c.n_contact)
            throw DataError("vocabulary sizes (" + std::to_string(objects.size()) + " objects, " +
                            std::to_string(attention.size()) + "/" + std::to_string(spatial.size()) + "/" +
                            std::to_string(contact.size()) + " predicates) do not match config (" +
                            std::to_string(c.object_classes) + ", " + std::to_string(c.n_attention) + "/" +
                            std::to_string(c.n_spatial) + "/" + std::to_string(c.n_contact) + ")");
    }
};

inline Vocabulary desk_vocabulary() {
    Vocabulary v;
    v.objects = {"person", "broom", "cup", "food", "chair", "door"};
    v.attention = {"looking_at", "not_looking_at"};
    v.spatial = {"in_front_of", "behind", "beside"};
    v.contact = {"holding", "touching", "not_contacting", "sitting_on"};
    return v;
}

// Action-Genome style vocabulary matching the paper preset sizes (36/3/6/17).
inline Vocabulary paper_vocabulary() {
    Vocabulary v;
    v.objects = {"person",     "bag",          "bed",        "blanket",   "book",           "box",
                 "broom",      "chair",        "closet",     "clothes",   "cup",            "dish",
                 "door",       "doorknob",     "doorway",    "floor",     "food",           "groceries",
                 "laptop",     "light",        "medicine",   "mirror",    "notebook",       "phone",
                 "picture",    "pillow",       "refrigerator", "sandwich", "shelf",         "shoe",
                 "sofa",       "table",        "television", "towel",     "vacuum",         "window"};
    v.attention = {"looking_at", "not_looking_at", "unsure"};
    v.spatial = {"above", "beneath", "in_front_of", "behind", "on_the_side_of", "in"};
    v.contact = {"carrying",      "covered_by",  "drinking_from", "eating",      "have_it_on_the_back",
                 "holding",       "leaning_on",  "lying_on",      "not_contacting", "other_relationship",
                 "sitting_on",    "standing_on", "touching",      "twisting",    "wearing",
                 "wiping",        "writing_on"};
    return v;
}

inline Vocabulary vocabulary_for_preset(const std::string& preset) {
    if (preset == "paper") return paper_vocabulary();
    return desk_vocabulary();
}

inline void save_vocabulary(const Vocabulary& v, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write vocabulary file: " + path);
    auto section = [&](const char* name, const std::vector<std::string>& items) {
        out << "[" << name << "]\n";
        for (const auto& s : items) out << s << "\n";
    };
    section("objects", v.objects);
    section("attention", v.attention);
    section("spatial", v.spatial);
    section("contact", v.contact);
}

inline Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary file: " + path);
    Vocabulary v;
    std::vector<std::string>* current = nullptr;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line == "[objects]") current = &v.objects;
            else if (line == "[attention]") current = &v.attention;
            else if (line == "[spatial]") current = &v.spatial;
            else if (line == "[contact]") current = &v.contact;
            else throw DataError("vocabulary line " + std::to_string(lineno) + ": unknown section " + line);
            continue;
        }
        if (!current) throw DataError("vocabulary line " + std::to_string(lineno) + ": name before any section");
        current->push_back(line);
    }
    if (v.objects.empty()) throw DataError("vocabulary file has no object classes: " + path);
    return v;
}

}  // namespace sttran
