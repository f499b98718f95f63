#pragma once

// Corpus ingestion: NLI sentence pairs (JSONL or TSV), CoNLL-U dependency
// annotations, and the merge step that joins both with WordNet synset labels
// into validated annotated pairs.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipt/common.hpp"
#include "lipt/types.hpp"
#include "lipt/wordnet.hpp"

namespace lipt {

struct NliPair {
    std::string id;
    std::string premise;
    std::string hypothesis;
    NliLabel gold = NliLabel::Neutral;
};

struct Word {
    std::string form;
    Upos upos = Upos::X;
    int head = 0; // 1-based index of the parent word; 0 = root
    std::optional<std::string> lemma;
};

struct AnnotatedSentence {
    std::vector<Word> words;
};

struct AnnotatedPair {
    NliPair pair;
    AnnotatedSentence premise_ann;
    AnnotatedSentence hypothesis_ann;
    std::vector<SynsetLabel> premise_syn;
    std::vector<SynsetLabel> hypothesis_syn;
};

enum class CorpusFormat { Jsonl, Tsv };

inline CorpusFormat corpus_format_from_string(std::string_view s) {
    if (s == "jsonl") return CorpusFormat::Jsonl;
    if (s == "tsv") return CorpusFormat::Tsv;
    throw ConfigError(concat("unknown corpus format: '", std::string(s), "'"));
}

struct NliLoadResult {
    std::vector<NliPair> pairs;
    size_t total_lines = 0;
    size_t skipped = 0;
    std::vector<std::string> skip_log; // "line N: reason"
};

namespace detail {

inline std::optional<NliPair> parse_jsonl_pair(const std::string& line, size_t line_no,
                                               std::string& reason) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        reason = "not a JSON object";
        return std::nullopt;
    }
    if (!j.contains("gold_label") || !j.contains("sentence1") || !j.contains("sentence2")) {
        reason = "missing gold_label/sentence1/sentence2";
        return std::nullopt;
    }
    if (!j["gold_label"].is_string() || !j["sentence1"].is_string() || !j["sentence2"].is_string()) {
        reason = "gold_label/sentence1/sentence2 must be strings";
        return std::nullopt;
    }
    NliPair p;
    if (!nli_label_from_string(j["gold_label"].get<std::string>(), p.gold)) {
        reason = concat("gold label '", j["gold_label"].get<std::string>(),
                        "' is not one of the three classes");
        return std::nullopt;
    }
    p.premise = trim(j["sentence1"].get<std::string>());
    p.hypothesis = trim(j["sentence2"].get<std::string>());
    if (p.premise.empty() || p.hypothesis.empty()) {
        reason = "empty sentence after trimming";
        return std::nullopt;
    }
    p.id = j.contains("pairID") && j["pairID"].is_string()
               ? j["pairID"].get<std::string>()
               : concat("line-", line_no);
    return p;
}

inline std::optional<NliPair> parse_tsv_pair(const std::string& line, size_t line_no,
                                             std::string& reason) {
    auto cols = split(line, '\t');
    if (cols.size() != 3) {
        reason = concat("expected 3 tab-separated columns, got ", cols.size());
        return std::nullopt;
    }
    NliPair p;
    if (!nli_label_from_string(trim(cols[0]), p.gold)) {
        reason = concat("gold label '", std::string(trim(cols[0])),
                        "' is not one of the three classes");
        return std::nullopt;
    }
    p.premise = trim(cols[1]);
    p.hypothesis = trim(cols[2]);
    if (p.premise.empty() || p.hypothesis.empty()) {
        reason = "empty sentence after trimming";
        return std::nullopt;
    }
    p.id = concat("line-", line_no);
    return p;
}

} // namespace detail

// Reads an NLI corpus line by line. Malformed lines and lines without a
// majority gold label are skipped and counted; zero valid pairs is fatal.
inline NliLoadResult load_nli_corpus(const std::filesystem::path& path, CorpusFormat format) {
    std::ifstream in(path);
    if (!in) throw Error(concat("cannot open corpus file: ", path.string()));

    NliLoadResult res;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        ++res.total_lines;
        std::string reason;
        if (format == CorpusFormat::Tsv && line_no == 1) {
            ++res.skipped;
            res.skip_log.push_back("line 1: header row");
            continue;
        }
        std::optional<NliPair> p;
        if (trim(line).empty()) {
            reason = "blank line";
        } else if (format == CorpusFormat::Jsonl) {
            p = detail::parse_jsonl_pair(line, line_no, reason);
        } else {
            p = detail::parse_tsv_pair(line, line_no, reason);
        }
        if (p) {
            res.pairs.push_back(std::move(*p));
        } else {
            ++res.skipped;
            res.skip_log.push_back(concat("line ", line_no, ": ", reason));
        }
    }
    if (res.pairs.empty())
        throw Error(concat("no valid pairs in ", path.string()));
    return res;
}

// Checks the head-graph invariants of one sentence: heads in range and not
// self-referential, exactly one root, and no cycles. sent_index is 1-based
// for error messages.
inline void validate_tree(const AnnotatedSentence& s, size_t sent_index) {
    const int n = static_cast<int>(s.words.size());
    for (int i = 0; i < n; ++i) {
        const int head = s.words[static_cast<size_t>(i)].head;
        if (head < 0 || head > n)
            throw ParseError(concat("sentence ", sent_index, ": head ", head,
                                    " of word ", i + 1, " out of range [0, ", n, "]"));
        if (head == i + 1)
            throw ParseError(concat("sentence ", sent_index, ": word ", i + 1,
                                    " is its own head"));
    }
    // In a functional graph with no self-loops, failing to reach the root
    // within n steps means a cycle.
    for (int i = 0; i < n; ++i) {
        int cur = i + 1;
        int steps = 0;
        while (cur != 0) {
            cur = s.words[static_cast<size_t>(cur - 1)].head;
            if (++steps > n)
                throw ParseError(concat("sentence ", sent_index,
                                        ": cyclic head graph at word ", i + 1));
        }
    }
    int roots = 0;
    for (const Word& w : s.words)
        if (w.head == 0) ++roots;
    if (roots == 0)
        throw ParseError(concat("sentence ", sent_index, ": no root word"));
    if (roots > 1)
        throw ParseError(concat("sentence ", sent_index, ": multiple roots (", roots, ")"));
}

// Loads a CoNLL-U file: blank-line-separated sentences with 10 tab-separated
// columns. Multiword-token ranges ("3-4") and empty nodes ("5.1") are
// skipped. Every sentence is validated against the tree invariants.
inline std::vector<AnnotatedSentence> load_conllu(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(concat("cannot open CoNLL-U file: ", path.string()));

    std::vector<AnnotatedSentence> out;
    AnnotatedSentence cur;
    std::string line;
    size_t line_no = 0;
    int expected_id = 1;

    auto flush = [&] {
        if (cur.words.empty()) return;
        validate_tree(cur, out.size() + 1);
        out.push_back(std::move(cur));
        cur = {};
        expected_id = 1;
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            flush();
            continue;
        }
        if (line[0] == '#') continue;
        auto cols = split(line, '\t');
        if (cols.size() != 10)
            throw ParseError(concat(path.string(), ":", line_no, ": expected 10 columns, got ",
                                    cols.size()));
        const std::string& id = cols[0];
        if (id.find('-') != std::string::npos || id.find('.') != std::string::npos)
            continue; // multiword-token range or empty node
        uint32_t id_val = 0;
        if (!lipt::detail::parse_u32(id, id_val))
            throw ParseError(concat(path.string(), ":", line_no, ": non-integer token ID '",
                                    id, "'"));
        if (static_cast<int>(id_val) != expected_id)
            throw ParseError(concat(path.string(), ":", line_no, ": token ID ", id_val,
                                    ", expected ", expected_id));
        ++expected_id;

        Word w;
        w.form = cols[1];
        if (cols[2] != "_" && !cols[2].empty()) w.lemma = cols[2];
        w.upos = upos_from_string(cols[3]); // throws on unknown tags
        uint32_t head = 0;
        if (!lipt::detail::parse_u32(cols[6], head))
            throw ParseError(concat(path.string(), ":", line_no, ": non-integer HEAD '",
                                    cols[6], "'"));
        w.head = static_cast<int>(head);
        cur.words.push_back(std::move(w));
    }
    flush();
    return out;
}

// Debug writer; load_conllu(write_conllu(x)) is a fixed point on the
// FORM/UPOS/HEAD columns.
inline void write_conllu(std::ostream& os, const std::vector<AnnotatedSentence>& sentences) {
    for (const auto& s : sentences) {
        for (size_t i = 0; i < s.words.size(); ++i) {
            const Word& w = s.words[i];
            os << (i + 1) << '\t' << w.form << '\t' << (w.lemma ? *w.lemma : "_") << '\t'
               << to_string(w.upos) << "\t_\t_\t" << w.head << "\t_\t_\t_\n";
        }
        os << '\n';
    }
}

inline void write_conllu(const std::filesystem::path& path,
                         const std::vector<AnnotatedSentence>& sentences) {
    std::ofstream os(path);
    if (!os) throw Error(concat("cannot write CoNLL-U file: ", path.string()));
    write_conllu(os, sentences);
}

// Writer for the JSONL corpus format (gold_label/sentence1/sentence2).
inline void write_nli_jsonl(const std::filesystem::path& path,
                            const std::vector<NliPair>& pairs) {
    std::ofstream os(path);
    if (!os) throw Error(concat("cannot write corpus file: ", path.string()));
    for (const auto& p : pairs) {
        nlohmann::json j;
        j["pairID"] = p.id;
        j["gold_label"] = std::string(to_string(p.gold));
        j["sentence1"] = p.premise;
        j["sentence2"] = p.hypothesis;
        os << j.dump() << '\n';
    }
}

struct MergeResult {
    std::vector<AnnotatedPair> pairs;
    size_t dropped = 0;
    std::vector<std::string> warnings;
};

// Joins pairs with their premise/hypothesis annotations (index-aligned) and
// fills synset labels for every word. Pairs whose whitespace word count
// disagrees with the annotation are dropped with a warning; a count mismatch
// between the lists is fatal.
inline MergeResult merge_annotations(const std::vector<NliPair>& pairs,
                                     const std::vector<AnnotatedSentence>& premise_anns,
                                     const std::vector<AnnotatedSentence>& hypothesis_anns,
                                     const WordnetIndex& wordnet,
                                     bool include_adverbs = true) {
    if (pairs.size() != premise_anns.size() || pairs.size() != hypothesis_anns.size())
        throw Error(concat("annotation count mismatch: ", pairs.size(), " pairs vs ",
                           premise_anns.size(), " premise / ", hypothesis_anns.size(),
                           " hypothesis annotations"));

    MergeResult res;
    for (size_t i = 0; i < pairs.size(); ++i) {
        const auto& pa = premise_anns[i];
        const auto& ha = hypothesis_anns[i];
        const size_t pw = split_ws(pairs[i].premise).size();
        const size_t hw = split_ws(pairs[i].hypothesis).size();
        if (pw != pa.words.size() || hw != ha.words.size()) {
            ++res.dropped;
            res.warnings.push_back(concat("pair ", pairs[i].id, ": word count mismatch (",
                                          pw, "/", pa.words.size(), " premise, ", hw, "/",
                                          ha.words.size(), " hypothesis), dropped"));
            continue;
        }
        AnnotatedPair ap;
        ap.pair = pairs[i];
        ap.premise_ann = pa;
        ap.hypothesis_ann = ha;
        ap.premise_syn.reserve(pa.words.size());
        for (const Word& w : pa.words)
            ap.premise_syn.push_back(synset_label_for_word(wordnet, w.form, w.upos, include_adverbs));
        ap.hypothesis_syn.reserve(ha.words.size());
        for (const Word& w : ha.words)
            ap.hypothesis_syn.push_back(synset_label_for_word(wordnet, w.form, w.upos, include_adverbs));
        res.pairs.push_back(std::move(ap));
    }
    return res;
}

} // namespace lipt
