#pragma once

// Deterministic synthetic corpora for the workbench:
//   - separable_grammar: a tiny NLI grammar whose classes are marked by
//     token patterns, used to demonstrate learnability of the fine-tuning
//     loop on its own.
//   - caption corpus: SNLI-shaped caption pairs with full dependency and POS
//     annotation plus a generated WNDB fixture covering the lexicon, so the
//     whole annotate -> pretrain -> finetune -> evaluate pipeline runs
//     without external resources.

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "lipt/common.hpp"
#include "lipt/corpus.hpp"
#include "lipt/tokenizer.hpp"
#include "lipt/types.hpp"
#include "lipt/wordnet.hpp"

namespace lipt::datagen {

// ---- separable grammar ----
// premise:        "the S V the O"
// entailment:     hypothesis identical to the premise
// contradiction:  negation token inserted:  "the S not V the O"
// neutral:        extra location attached:  "the S V the O in the P"

inline std::vector<LabeledPair> separable_grammar(size_t n, uint64_t seed) {
    static const std::vector<std::string> subjects = {
        "dog", "cat", "bird", "horse", "man", "woman", "boy", "girl", "robot", "farmer"};
    static const std::vector<std::string> verbs = {
        "chases", "holds", "sees", "likes", "pushes", "follows", "carries", "watches"};
    static const std::vector<std::string> objects = {
        "ball", "stick", "book", "kite", "rope", "box", "apple", "shoe"};
    static const std::vector<std::string> places = {"park", "yard", "field", "street", "garden"};

    std::mt19937_64 rng(seed);
    auto pick = [&rng](const std::vector<std::string>& xs) {
        return xs[std::uniform_int_distribution<size_t>(0, xs.size() - 1)(rng)];
    };

    std::vector<LabeledPair> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const std::string s = pick(subjects), v = pick(verbs), o = pick(objects);
        std::vector<std::string> premise = {"the", s, v, "the", o};
        std::vector<std::string> hypothesis = premise;
        const auto gold = static_cast<NliLabel>(i % 3);
        if (gold == NliLabel::Contradiction) {
            hypothesis = {"the", s, "not", v, "the", o};
        } else if (gold == NliLabel::Neutral) {
            hypothesis = {"the", s, v, "the", o, "in", "the", pick(places)};
        }
        LabeledPair p;
        p.id = concat("g-", i);
        p.gold = gold;
        for (const auto& w : premise) p.premise.push_back({w, 0, 0, 0});
        for (const auto& w : hypothesis) p.hypothesis.push_back({w, 0, 0, 0});
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<std::string> all_words(const std::vector<LabeledPair>& pairs) {
    std::vector<std::string> out;
    for (const auto& p : pairs) {
        for (const auto& w : p.premise) out.push_back(w.form);
        for (const auto& w : p.hypothesis) out.push_back(w.form);
    }
    return out;
}

// ---- caption corpus ----

namespace detail {

struct Tok {
    std::string form;
    Upos upos = Upos::X;
    char self = 0;   // anchor id this token defines ('s', 'v', 'o', 'p', 'u')
    char attach = 0; // anchor the token attaches to; 0 = root
};

inline AnnotatedSentence realize(const std::vector<Tok>& toks) {
    std::map<char, int> anchor; // 1-based positions
    for (size_t i = 0; i < toks.size(); ++i)
        if (toks[i].self) anchor[toks[i].self] = static_cast<int>(i) + 1;
    AnnotatedSentence s;
    for (const auto& t : toks) {
        Word w;
        w.form = t.form;
        w.upos = t.upos;
        w.head = t.attach ? anchor.at(t.attach) : 0;
        s.words.push_back(std::move(w));
    }
    validate_tree(s, 0);
    return s;
}

inline std::string text_of(const AnnotatedSentence& s) {
    std::string out;
    for (size_t i = 0; i < s.words.size(); ++i) {
        if (i) out += ' ';
        out += s.words[i].form;
    }
    return out;
}

struct CaptionLexicon {
    std::vector<std::string> people = {"man",      "woman",  "boy",    "girl",  "child",
                                       "worker",   "farmer", "dancer", "doctor", "musician"};
    std::vector<std::string> animals = {"dog", "cat", "horse", "bird", "cow", "sheep", "rabbit", "goat"};
    std::vector<std::string> objects = {"ball", "book",  "guitar", "basket", "kite",  "drum",
                                        "rope", "flag",  "ladder", "wheel",  "wagon", "cart",
                                        "box",  "bucket"};
    std::vector<std::string> places = {"park",   "street", "beach",  "field", "market",
                                       "garden", "yard",   "stadium", "forest", "farm"};
    // 3rd-person form first, base form second; the base appears in negated
    // hypotheses and must resolve through the morphological rules.
    std::vector<std::pair<std::string, std::string>> verbs = {
        {"rides", "ride"},     {"holds", "hold"},   {"carries", "carry"},
        {"pushes", "push"},    {"pulls", "pull"},   {"watches", "watch"},
        {"kicks", "kick"},     {"throws", "throw"}, {"catches", "catch"},
        {"paints", "paint"},   {"lifts", "lift"},   {"washes", "wash"},
        {"drags", "drag"},     {"grabs", "grab"}};
    std::vector<std::string> adjectives = {"red",   "blue",  "green", "yellow", "young", "old",
                                           "small", "large", "tall",  "happy",  "tired", "busy"};
    std::vector<std::string> adverbs = {"quickly", "slowly", "carefully", "quietly"};
    std::vector<std::string> purposes = {"contest", "practice", "festival", "lesson",
                                         "celebration", "picnic", "competition"};
    std::string person_hypernym = "person";
    std::string animal_hypernym = "animal";
};

inline const CaptionLexicon& caption_lexicon() {
    static const CaptionLexicon lex;
    return lex;
}

} // namespace detail

struct GeneratedSplit {
    std::vector<NliPair> pairs;
    std::vector<AnnotatedSentence> premises;
    std::vector<AnnotatedSentence> hypotheses;
};

// Caption-style pairs with gold labels derived from systematic transforms.
// Each class mixes an overt lexical cue with a transform that requires
// comparing the two sentences:
//   entailment:    subject generalized to its hypernym / exact repeat
//   contradiction: negation inserted / subject or place replaced
//   neutral:       unverifiable purpose phrase or adjective added
inline GeneratedSplit caption_split(size_t n, uint64_t seed) {
    using detail::Tok;
    const auto& lex = detail::caption_lexicon();
    std::mt19937_64 rng(seed);
    auto pick = [&rng](const std::vector<std::string>& xs) {
        return xs[std::uniform_int_distribution<size_t>(0, xs.size() - 1)(rng)];
    };
    auto pick_other = [&](const std::vector<std::string>& xs, const std::string& not_this) {
        std::string w = pick(xs);
        while (w == not_this) w = pick(xs);
        return w;
    };
    auto chance = [&rng](double p) {
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
    };

    GeneratedSplit out;
    for (size_t i = 0; i < n; ++i) {
        const bool subj_is_person = chance(0.6);
        const auto& subj_pool = subj_is_person ? lex.people : lex.animals;
        const std::string subj = pick(subj_pool);
        const auto& verb_pair =
            lex.verbs[std::uniform_int_distribution<size_t>(0, lex.verbs.size() - 1)(rng)];
        const bool obj_is_animal = chance(0.25);
        const std::string obj =
            obj_is_animal ? pick_other(lex.animals, subj) : pick(lex.objects);
        const bool has_subj_adj = chance(0.5);
        const bool has_obj_adj = chance(0.4);
        const bool has_pp = chance(0.6);
        const bool has_adv = chance(0.3);
        const std::string subj_adj = pick(lex.adjectives);
        const std::string obj_adj = pick(lex.adjectives);
        const std::string place = pick(lex.places);
        const std::string adverb = pick(lex.adverbs);

        // assemble: A [adjS] SUBJ VERB a [adjO] OBJ [in the PLACE] [ADV] .
        auto premise_toks = [&](bool adj_s, bool adj_o, bool pp, bool adv) {
            std::vector<Tok> t;
            t.push_back({"A", Upos::Det, 0, 's'});
            if (adj_s) t.push_back({subj_adj, Upos::Adj, 0, 's'});
            t.push_back({subj, Upos::Noun, 's', 'v'});
            t.push_back({verb_pair.first, Upos::Verb, 'v', 0});
            t.push_back({"a", Upos::Det, 0, 'o'});
            if (adj_o) t.push_back({obj_adj, Upos::Adj, 0, 'o'});
            t.push_back({obj, Upos::Noun, 'o', 'v'});
            if (pp) {
                t.push_back({"in", Upos::Adp, 0, 'p'});
                t.push_back({"the", Upos::Det, 0, 'p'});
                t.push_back({place, Upos::Noun, 'p', 'v'});
            }
            if (adv) t.push_back({adverb, Upos::Adv, 0, 'v'});
            t.push_back({".", Upos::Punct, 0, 'v'});
            return t;
        };

        AnnotatedSentence premise =
            detail::realize(premise_toks(has_subj_adj, has_obj_adj, has_pp, has_adv));

        const auto gold = static_cast<NliLabel>(i % 3);
        std::vector<Tok> hyp;
        if (gold == NliLabel::Entailment) {
            if (chance(0.5)) {
                // generalize the subject, drop modifiers
                const std::string hyper =
                    subj_is_person ? lex.person_hypernym : lex.animal_hypernym;
                hyp.push_back({"A", Upos::Det, 0, 's'});
                hyp.push_back({hyper, Upos::Noun, 's', 'v'});
                hyp.push_back({verb_pair.first, Upos::Verb, 'v', 0});
                hyp.push_back({"a", Upos::Det, 0, 'o'});
                hyp.push_back({obj, Upos::Noun, 'o', 'v'});
                hyp.push_back({".", Upos::Punct, 0, 'v'});
            } else if (chance(0.5)) {
                hyp = premise_toks(has_subj_adj, has_obj_adj, has_pp, has_adv); // repeat
            } else {
                hyp = premise_toks(false, false, false, false); // drop modifiers
            }
        } else if (gold == NliLabel::Contradiction) {
            if (chance(0.5)) {
                // negation
                hyp.push_back({"A", Upos::Det, 0, 's'});
                if (has_subj_adj) hyp.push_back({subj_adj, Upos::Adj, 0, 's'});
                hyp.push_back({subj, Upos::Noun, 's', 'v'});
                hyp.push_back({"does", Upos::Aux, 0, 'v'});
                hyp.push_back({"not", Upos::Part, 0, 'v'});
                hyp.push_back({verb_pair.second, Upos::Verb, 'v', 0});
                hyp.push_back({"a", Upos::Det, 0, 'o'});
                hyp.push_back({obj, Upos::Noun, 'o', 'v'});
                hyp.push_back({".", Upos::Punct, 0, 'v'});
            } else if (has_pp && chance(0.5)) {
                // same scene, different place
                const std::string other_place = pick_other(lex.places, place);
                hyp = premise_toks(has_subj_adj, has_obj_adj, false, false);
                hyp.pop_back(); // drop "."
                hyp.push_back({"in", Upos::Adp, 0, 'p'});
                hyp.push_back({"the", Upos::Det, 0, 'p'});
                hyp.push_back({other_place, Upos::Noun, 'p', 'v'});
                hyp.push_back({".", Upos::Punct, 0, 'v'});
            } else {
                // different actor
                const std::string other = pick_other(subj_pool, subj);
                hyp.push_back({"A", Upos::Det, 0, 's'});
                hyp.push_back({other, Upos::Noun, 's', 'v'});
                hyp.push_back({verb_pair.first, Upos::Verb, 'v', 0});
                hyp.push_back({"a", Upos::Det, 0, 'o'});
                if (has_obj_adj) hyp.push_back({obj_adj, Upos::Adj, 0, 'o'});
                hyp.push_back({obj, Upos::Noun, 'o', 'v'});
                hyp.push_back({".", Upos::Punct, 0, 'v'});
            }
        } else { // neutral
            if (chance(0.5)) {
                // added purpose
                const std::string purpose = pick(lex.purposes);
                hyp = premise_toks(has_subj_adj, false, false, false);
                hyp.pop_back();
                hyp.push_back({"for", Upos::Adp, 0, 'u'});
                hyp.push_back({"a", Upos::Det, 0, 'u'});
                hyp.push_back({purpose, Upos::Noun, 'u', 'v'});
                hyp.push_back({".", Upos::Punct, 0, 'v'});
            } else {
                // added, unverifiable adjective
                const std::string new_adj =
                    pick_other(lex.adjectives, has_subj_adj ? subj_adj : "");
                hyp.push_back({"A", Upos::Det, 0, 's'});
                hyp.push_back({new_adj, Upos::Adj, 0, 's'});
                hyp.push_back({subj, Upos::Noun, 's', 'v'});
                hyp.push_back({verb_pair.first, Upos::Verb, 'v', 0});
                hyp.push_back({"a", Upos::Det, 0, 'o'});
                if (has_obj_adj) hyp.push_back({obj_adj, Upos::Adj, 0, 'o'});
                hyp.push_back({obj, Upos::Noun, 'o', 'v'});
                hyp.push_back({".", Upos::Punct, 0, 'v'});
            }
        }

        AnnotatedSentence hypothesis = detail::realize(hyp);
        NliPair pair;
        pair.id = concat("c-", i);
        pair.gold = gold;
        pair.premise = detail::text_of(premise);
        pair.hypothesis = detail::text_of(hypothesis);
        out.pairs.push_back(std::move(pair));
        out.premises.push_back(std::move(premise));
        out.hypotheses.push_back(std::move(hypothesis));
    }
    return out;
}

// ---- WNDB fixture generation ----

struct WnLexeme {
    std::string lemma;
    WnPos pos = WnPos::Noun;
};

// Every content lemma of the caption corpus, so annotation resolves all
// nouns/verbs/adjectives/adverbs to a synset.
inline std::vector<WnLexeme> caption_wordnet_lexicon() {
    const auto& lex = detail::caption_lexicon();
    std::vector<WnLexeme> out;
    auto add_all = [&out](const std::vector<std::string>& xs, WnPos pos) {
        for (const auto& x : xs) out.push_back({x, pos});
    };
    add_all(lex.people, WnPos::Noun);
    add_all(lex.animals, WnPos::Noun);
    add_all(lex.objects, WnPos::Noun);
    add_all(lex.places, WnPos::Noun);
    add_all(lex.purposes, WnPos::Noun);
    out.push_back({lex.person_hypernym, WnPos::Noun});
    out.push_back({lex.animal_hypernym, WnPos::Noun});
    for (const auto& [third, base] : lex.verbs) out.push_back({base, WnPos::Verb});
    out.push_back({"do", WnPos::Verb}); // "does" resolves here
    add_all(lex.adjectives, WnPos::Adj);
    add_all(lex.adverbs, WnPos::Adv);
    return out;
}

// Writes a minimal but format-correct WNDB directory: index.<pos>, data.<pos>
// and <pos>.exc files, one single-lemma synset per lexeme. Header lines use
// the two-space license convention real databases carry.
inline void write_wordnet_fixture(const std::filesystem::path& dir,
                                  const std::vector<WnLexeme>& lexemes) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    static constexpr WnPos all_pos[] = {WnPos::Noun, WnPos::Verb, WnPos::Adj, WnPos::Adv};
    const char* header = "  1 generated fixture database\n  2 not for lexicographic use\n";

    for (WnPos pos : all_pos) {
        std::ofstream index(dir / concat("index.", wn_pos_name(pos)));
        std::ofstream data(dir / concat("data.", wn_pos_name(pos)));
        std::ofstream exc(dir / concat(wn_pos_name(pos), ".exc"));
        if (!index || !data || !exc)
            throw Error(concat("cannot write wordnet fixture in ", dir.string()));
        index << header;
        data << header;

        uint32_t offset = 100000u * (static_cast<uint32_t>(pos) + 1);
        for (const auto& lx : lexemes) {
            if (lx.pos != pos) continue;
            offset += 97;
            char off[16];
            std::snprintf(off, sizeof off, "%08u", offset);
            index << lx.lemma << ' ' << wn_pos_letter(pos) << " 1 0 1 0 " << off << '\n';
            data << off << " 00 " << wn_pos_letter(pos) << " 01 " << lx.lemma
                 << " 0 000 | generated gloss for " << lx.lemma << '\n';
        }
        if (pos == WnPos::Verb) exc << "is be\nwas be\ndoes do\ndid do\n";
    }
}

// Writes <dir>/{train,dev,test}.{jsonl,premise.conllu,hypothesis.conllu} and
// <dir>/wordnet/. Splits use consecutive sub-seeds of the base seed.
inline void write_caption_corpus(const std::filesystem::path& dir, size_t train_n,
                                 size_t dev_n, size_t test_n, uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::pair<const char*, size_t> splits[] = {
        {"train", train_n}, {"dev", dev_n}, {"test", test_n}};
    uint64_t split_seed = seed;
    for (const auto& [name, n] : splits) {
        if (n == 0) continue;
        GeneratedSplit split = caption_split(n, split_seed++);
        write_nli_jsonl(dir / concat(name, ".jsonl"), split.pairs);
        write_conllu(dir / concat(name, ".premise.conllu"), split.premises);
        write_conllu(dir / concat(name, ".hypothesis.conllu"), split.hypotheses);
    }
    write_wordnet_fixture(dir / "wordnet", caption_wordnet_lexicon());
}

} // namespace lipt::datagen
