#pragma once

// WNDB database file parsing and the first-sense lookup used to label words
// with synsets. Covers the four open POS classes (satellite adjectives fold
// into 'a'), the standard morphological detachment rules, and the exception
// lists shipped with the database.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lipt/common.hpp"
#include "lipt/types.hpp"

namespace lipt {

enum class WnPos : uint8_t { Noun = 0, Verb = 1, Adj = 2, Adv = 3 };

inline char wn_pos_letter(WnPos p) {
    switch (p) {
        case WnPos::Noun: return 'n';
        case WnPos::Verb: return 'v';
        case WnPos::Adj: return 'a';
        case WnPos::Adv: return 'r';
    }
    return '?';
}

inline std::string_view wn_pos_name(WnPos p) {
    switch (p) {
        case WnPos::Noun: return "noun";
        case WnPos::Verb: return "verb";
        case WnPos::Adj: return "adj";
        case WnPos::Adv: return "adv";
    }
    return "?";
}

// 's' (satellite adjective) folds into 'a'.
inline std::optional<WnPos> wn_pos_from_letter(char c) {
    switch (c) {
        case 'n': return WnPos::Noun;
        case 'v': return WnPos::Verb;
        case 'a':
        case 's': return WnPos::Adj;
        case 'r': return WnPos::Adv;
        default: return std::nullopt;
    }
}

// (pos, offset) identifies a synset within one database release; the display
// name ("lady.n.01") is only available when data files were loaded.
struct SynsetKey {
    WnPos pos = WnPos::Noun;
    uint32_t offset = 0;
    std::string display;

    // Identity is (pos, offset); display is derived presentation.
    friend bool operator==(const SynsetKey& a, const SynsetKey& b) {
        return a.pos == b.pos && a.offset == b.offset;
    }
    friend bool operator<(const SynsetKey& a, const SynsetKey& b) {
        return a.pos != b.pos ? a.pos < b.pos : a.offset < b.offset;
    }

    // Stable serialization, e.g. "n:102837".
    std::string key_string() const {
        return concat(wn_pos_letter(pos), ':', offset);
    }

    // Display name when known, otherwise the stable key string.
    std::string name() const { return display.empty() ? key_string() : display; }
};

// Either the distinguished no_syn class (shared across all POS) or a synset.
class SynsetLabel {
public:
    SynsetLabel() = default;
    static SynsetLabel no_syn() { return SynsetLabel(); }
    static SynsetLabel key(SynsetKey k) {
        SynsetLabel l;
        l.key_ = std::move(k);
        return l;
    }

    bool is_no_syn() const { return !key_.has_value(); }
    const SynsetKey& synset() const {
        if (!key_) throw Error("SynsetLabel: no_syn has no synset key");
        return *key_;
    }
    std::string name() const { return key_ ? key_->name() : "no_syn"; }
    std::string key_string() const { return key_ ? key_->key_string() : "no_syn"; }

    friend bool operator==(const SynsetLabel& a, const SynsetLabel& b) {
        if (a.is_no_syn() || b.is_no_syn()) return a.is_no_syn() == b.is_no_syn();
        return *a.key_ == *b.key_;
    }

private:
    std::optional<SynsetKey> key_;
};

struct WordnetIndex {
    // (lemma, pos) -> synset keys ordered most-frequent-sense first.
    std::map<std::pair<std::string, WnPos>, std::vector<SynsetKey>> entries;
    // (inflected form, pos) -> base lemmas, from the <pos>.exc lists.
    std::map<std::pair<std::string, WnPos>, std::vector<std::string>> exceptions;
    // (pos, offset) -> member lemmas in data-file order.
    std::map<std::pair<WnPos, uint32_t>, std::vector<std::string>> data_lemmas;
    bool has_data = false;

    struct LoadStats {
        size_t index_lines = 0;
        size_t data_lines = 0;
        size_t exception_lines = 0;
        size_t malformed_skipped = 0;
        size_t missing_exception_files = 0;
    } stats;

    const std::vector<SynsetKey>* find(const std::string& lemma, WnPos pos) const {
        auto it = entries.find({lemma, pos});
        return it == entries.end() ? nullptr : &it->second;
    }
};

namespace detail {

inline bool parse_u32(std::string_view s, uint32_t& out) {
    if (s.empty() || s.size() > 9) return false;
    uint32_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + static_cast<uint32_t>(c - '0');
    }
    out = v;
    return true;
}

inline bool parse_hex(std::string_view s, uint32_t& out) {
    if (s.empty() || s.size() > 8) return false;
    uint32_t v = 0;
    for (char c : s) {
        uint32_t d;
        if (c >= '0' && c <= '9') d = static_cast<uint32_t>(c - '0');
        else if (c >= 'a' && c <= 'f') d = static_cast<uint32_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') d = static_cast<uint32_t>(c - 'A' + 10);
        else return false;
        v = v * 16 + d;
    }
    out = v;
    return true;
}

// License header lines in WNDB files begin with two spaces.
inline bool is_wndb_header(const std::string& line) {
    return line.size() >= 2 && line[0] == ' ' && line[1] == ' ';
}

// index.<pos> line:
//   lemma pos synset_cnt p_cnt [ptr_symbol...] sense_cnt tagsense_cnt offset...
inline bool parse_index_line(const std::string& line, WnPos file_pos,
                             std::string& lemma, std::vector<SynsetKey>& keys) {
    auto t = split_ws(line);
    if (t.size() < 7) return false;
    auto pos = t[1].size() == 1 ? wn_pos_from_letter(t[1][0]) : std::nullopt;
    if (!pos || *pos != file_pos) return false;
    uint32_t synset_cnt = 0, p_cnt = 0;
    if (!parse_u32(t[2], synset_cnt) || !parse_u32(t[3], p_cnt)) return false;
    size_t at = 4 + p_cnt;
    if (t.size() < at + 2) return false;
    uint32_t sense_cnt = 0, tagsense_cnt = 0;
    if (!parse_u32(t[at], sense_cnt) || !parse_u32(t[at + 1], tagsense_cnt)) return false;
    if (sense_cnt != synset_cnt || sense_cnt == 0) return false;
    at += 2;
    if (t.size() != at + sense_cnt) return false;
    keys.clear();
    for (size_t i = 0; i < sense_cnt; ++i) {
        uint32_t off = 0;
        if (!parse_u32(t[at + i], off)) return false;
        keys.push_back(SynsetKey{file_pos, off, {}});
    }
    lemma = to_lower(t[0]);
    return true;
}

// data.<pos> line:
//   offset lex_filenum ss_type w_cnt word lex_id [word lex_id...] p_cnt ...
inline bool parse_data_line(const std::string& line, WnPos file_pos,
                            uint32_t& offset, std::vector<std::string>& lemmas) {
    auto t = split_ws(line);
    if (t.size() < 6) return false;
    if (!parse_u32(t[0], offset)) return false;
    auto ss = t[2].size() == 1 ? wn_pos_from_letter(t[2][0]) : std::nullopt;
    if (!ss || *ss != file_pos) return false;
    uint32_t w_cnt = 0;
    if (!parse_hex(t[3], w_cnt) || w_cnt == 0) return false;
    if (t.size() < 4 + 2 * static_cast<size_t>(w_cnt)) return false;
    lemmas.clear();
    for (uint32_t i = 0; i < w_cnt; ++i) lemmas.push_back(to_lower(t[4 + 2 * i]));
    return true;
}

} // namespace detail

// Loads index.<pos> and <pos>.exc for all four POS; data.<pos> files are
// required iff with_data (they supply display names). Missing index files are
// fatal; malformed lines are skipped and counted.
inline WordnetIndex load_wordnet(const std::filesystem::path& dir, bool with_data) {
    namespace fs = std::filesystem;
    WordnetIndex idx;
    idx.has_data = with_data;

    static constexpr WnPos all_pos[] = {WnPos::Noun, WnPos::Verb, WnPos::Adj, WnPos::Adv};

    for (WnPos pos : all_pos) {
        fs::path p = dir / concat("index.", wn_pos_name(pos));
        if (!fs::exists(p))
            throw Error(concat("wordnet: missing index file: ", p.string()));
        std::ifstream in(p);
        if (!in) throw Error(concat("wordnet: cannot open ", p.string()));
        std::string line, lemma;
        std::vector<SynsetKey> keys;
        while (std::getline(in, line)) {
            if (line.empty() || detail::is_wndb_header(line)) continue;
            if (!detail::parse_index_line(line, pos, lemma, keys)) {
                ++idx.stats.malformed_skipped;
                continue;
            }
            auto [it, inserted] = idx.entries.emplace(std::make_pair(lemma, pos), keys);
            if (!inserted) ++idx.stats.malformed_skipped; // duplicate lemma line
            else ++idx.stats.index_lines;
        }
    }

    if (with_data) {
        for (WnPos pos : all_pos) {
            fs::path p = dir / concat("data.", wn_pos_name(pos));
            if (!fs::exists(p))
                throw Error(concat("wordnet: missing data file: ", p.string()));
            std::ifstream in(p);
            if (!in) throw Error(concat("wordnet: cannot open ", p.string()));
            std::string line;
            uint32_t offset = 0;
            std::vector<std::string> lemmas;
            while (std::getline(in, line)) {
                if (line.empty() || detail::is_wndb_header(line)) continue;
                if (!detail::parse_data_line(line, pos, offset, lemmas)) {
                    ++idx.stats.malformed_skipped;
                    continue;
                }
                idx.data_lemmas[{pos, offset}] = lemmas;
                ++idx.stats.data_lines;
            }
        }
        // Every synset referenced from an index must exist in the data file.
        for (const auto& [key, keys] : idx.entries) {
            for (const SynsetKey& k : keys) {
                if (!idx.data_lemmas.count({k.pos, k.offset}))
                    throw Error(concat("wordnet: index entry '", key.first,
                                       "' references offset ", k.offset,
                                       " absent from data.", wn_pos_name(k.pos)));
            }
        }
        // Render display names: first lemma of the data entry plus the
        // 1-based position of this offset in that lemma's own sense list.
        for (auto& [key, keys] : idx.entries) {
            for (SynsetKey& k : keys) {
                const auto& lemmas = idx.data_lemmas.at({k.pos, k.offset});
                const std::string& head = lemmas.front();
                auto it = idx.entries.find({head, k.pos});
                if (it == idx.entries.end()) continue;
                const auto& senses = it->second;
                for (size_t i = 0; i < senses.size(); ++i) {
                    if (senses[i].offset == k.offset) {
                        char num[24];
                        std::snprintf(num, sizeof num, "%02u",
                                      static_cast<unsigned>(i + 1));
                        k.display = concat(head, '.', wn_pos_letter(k.pos), '.', num);
                        break;
                    }
                }
            }
        }
    }

    for (WnPos pos : all_pos) {
        fs::path p = dir / concat(wn_pos_name(pos), ".exc");
        if (!fs::exists(p)) {
            ++idx.stats.missing_exception_files;
            continue;
        }
        std::ifstream in(p);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || detail::is_wndb_header(line)) continue;
            auto t = split_ws(line);
            if (t.size() < 2) {
                ++idx.stats.malformed_skipped;
                continue;
            }
            std::vector<std::string> bases(t.begin() + 1, t.end());
            for (auto& b : bases) b = to_lower(b);
            idx.exceptions[{to_lower(t[0]), pos}] = std::move(bases);
            ++idx.stats.exception_lines;
        }
    }

    return idx;
}

namespace detail {

struct Detachment {
    std::string_view suffix;
    std::string_view replacement;
};

inline const std::vector<Detachment>& detachments(WnPos pos) {
    static const std::vector<Detachment> noun = {
        {"s", ""}, {"ses", "s"}, {"xes", "x"}, {"zes", "z"},
        {"ches", "ch"}, {"shes", "sh"}, {"men", "man"}, {"ies", "y"},
    };
    static const std::vector<Detachment> verb = {
        {"s", ""}, {"ies", "y"}, {"es", "e"}, {"es", ""},
        {"ed", "e"}, {"ed", ""}, {"ing", "e"}, {"ing", ""},
    };
    static const std::vector<Detachment> adj = {
        {"er", ""}, {"est", ""}, {"er", "e"}, {"est", "e"},
    };
    static const std::vector<Detachment> none = {};
    switch (pos) {
        case WnPos::Noun: return noun;
        case WnPos::Verb: return verb;
        case WnPos::Adj: return adj;
        case WnPos::Adv: return none;
    }
    return none;
}

} // namespace detail

// Candidate base lemmas for an inflected form, ordered: exception-list
// matches, then detachment-rule results that exist in the index, then the
// form itself if it exists. Duplicates removed keeping first occurrence.
// The caller lowercases the form.
inline std::vector<std::string> morphy(const WordnetIndex& idx,
                                       const std::string& form, WnPos pos) {
    std::vector<std::string> out;
    auto push_unique = [&out](const std::string& s) {
        for (const auto& seen : out)
            if (seen == s) return;
        out.push_back(s);
    };

    if (auto it = idx.exceptions.find({form, pos}); it != idx.exceptions.end())
        for (const auto& base : it->second) push_unique(base);

    for (const auto& rule : detail::detachments(pos)) {
        if (form.size() <= rule.suffix.size()) continue;
        if (!std::string_view(form).ends_with(rule.suffix)) continue;
        std::string stem = form.substr(0, form.size() - rule.suffix.size());
        stem.append(rule.replacement);
        if (idx.find(stem, pos)) push_unique(stem);
    }

    if (idx.find(form, pos)) push_unique(form);
    return out;
}

// First (most frequent) sense of a lemma, or no_syn when the lemma is absent.
inline SynsetLabel first_synset(const WordnetIndex& idx,
                                const std::string& lemma, WnPos pos) {
    const auto* keys = idx.find(lemma, pos);
    if (!keys || keys->empty()) return SynsetLabel::no_syn();
    return SynsetLabel::key(keys->front());
}

// Maps an open-class UPOS to the WordNet POS used for lookup. AUX maps to
// verb so copulas resolve. Closed classes get no mapping.
inline std::optional<WnPos> wn_pos_for_upos(Upos upos, bool include_adverbs = true) {
    switch (upos) {
        case Upos::Noun:
        case Upos::Propn: return WnPos::Noun;
        case Upos::Verb:
        case Upos::Aux: return WnPos::Verb;
        case Upos::Adj: return WnPos::Adj;
        case Upos::Adv:
            if (include_adverbs) return WnPos::Adv;
            return std::nullopt;
        default: return std::nullopt;
    }
}

// Full word-to-label path: POS filter, lowercasing, morphy, first sense of
// the first candidate that resolves.
inline SynsetLabel synset_label_for_word(const WordnetIndex& idx,
                                         std::string_view form, Upos upos,
                                         bool include_adverbs = true) {
    auto pos = wn_pos_for_upos(upos, include_adverbs);
    if (!pos) return SynsetLabel::no_syn();
    std::string lower = to_lower(form);
    for (const auto& candidate : morphy(idx, lower, *pos)) {
        SynsetLabel label = first_synset(idx, candidate, *pos);
        if (!label.is_no_syn()) return label;
    }
    return SynsetLabel::no_syn();
}

} // namespace lipt
