#pragma once

// Core label enums shared across the pipeline: universal POS tags, the
// three-way NLI label, and the training objectives.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "lipt/common.hpp"

namespace lipt {

// Universal POS tagset, CoNLL-U column 4.
enum class Upos : int32_t {
    Adj, Adp, Adv, Aux, Cconj, Det, Intj, Noun, Num, Part,
    Pron, Propn, Punct, Sconj, Sym, Verb, X,
};

constexpr int kNumUpos = 17;

inline const std::array<std::string_view, kNumUpos>& upos_names() {
    static const std::array<std::string_view, kNumUpos> names = {
        "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
        "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
    };
    return names;
}

inline std::string_view to_string(Upos t) {
    return upos_names()[static_cast<size_t>(t)];
}

inline Upos upos_from_string(std::string_view s) {
    const auto& names = upos_names();
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == s) return static_cast<Upos>(i);
    throw ParseError(concat("unknown UPOS tag: '", std::string(s), "'"));
}

enum class NliLabel : int32_t { Contradiction = 0, Entailment = 1, Neutral = 2 };

constexpr int kNumNliClasses = 3;

inline std::string_view to_string(NliLabel l) {
    switch (l) {
        case NliLabel::Contradiction: return "contradiction";
        case NliLabel::Entailment: return "entailment";
        case NliLabel::Neutral: return "neutral";
    }
    return "?";
}

// Returns false for anything outside the three classes (e.g. the "-"
// placeholder used when annotators reached no majority).
inline bool nli_label_from_string(std::string_view s, NliLabel& out) {
    if (s == "contradiction") { out = NliLabel::Contradiction; return true; }
    if (s == "entailment") { out = NliLabel::Entailment; return true; }
    if (s == "neutral") { out = NliLabel::Neutral; return true; }
    return false;
}

// Training objectives: three token-level auxiliary tasks plus the sentence
// pair classification trained at the [CLS] position.
enum class Objective : int32_t { Pos = 0, Parent = 1, Synset = 2, Nli = 3 };

inline std::string_view to_string(Objective o) {
    switch (o) {
        case Objective::Pos: return "POS";
        case Objective::Parent: return "PP";
        case Objective::Synset: return "Syn";
        case Objective::Nli: return "NLI";
    }
    return "?";
}

inline Objective objective_from_string(std::string_view s) {
    if (s == "POS" || s == "pos") return Objective::Pos;
    if (s == "PP" || s == "pp") return Objective::Parent;
    if (s == "Syn" || s == "syn" || s == "SYN") return Objective::Synset;
    if (s == "NLI" || s == "nli") return Objective::Nli;
    throw ConfigError(concat("unknown objective: '", std::string(s), "'"));
}

// Label value marking positions excluded from a token objective's loss.
constexpr int32_t kIgnoreLabel = -1;

} // namespace lipt
