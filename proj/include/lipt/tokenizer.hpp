#pragma once

// Subword vocabulary induction (frequency-merge), greedy longest-match word
// segmentation, and encoding of premise-hypothesis pairs into model inputs
// with word-level labels projected onto every subtoken.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lipt/common.hpp"
#include "lipt/types.hpp"

namespace lipt {

struct Vocab {
    static constexpr int32_t kPad = 0;
    static constexpr int32_t kUnk = 1;
    static constexpr int32_t kCls = 2;
    static constexpr int32_t kSep = 3;
    static constexpr std::string_view kContinuation = "##";

    std::vector<std::string> token_of;
    std::unordered_map<std::string, int32_t> id_of;

    static Vocab with_specials() {
        Vocab v;
        v.add("[PAD]");
        v.add("[UNK]");
        v.add("[CLS]");
        v.add("[SEP]");
        return v;
    }

    int32_t add(const std::string& tok) {
        auto it = id_of.find(tok);
        if (it != id_of.end()) return it->second;
        int32_t id = static_cast<int32_t>(token_of.size());
        token_of.push_back(tok);
        id_of.emplace(tok, id);
        return id;
    }

    // -1 when absent.
    int32_t lookup(const std::string& tok) const {
        auto it = id_of.find(tok);
        return it == id_of.end() ? -1 : it->second;
    }

    bool contains(const std::string& tok) const { return id_of.count(tok) > 0; }
    size_t size() const { return token_of.size(); }
};

namespace detail {

// Byte offsets of UTF-8 codepoint boundaries, including word.size().
inline std::vector<size_t> utf8_boundaries(std::string_view word) {
    std::vector<size_t> bounds;
    bounds.push_back(0);
    size_t i = 0;
    while (i < word.size()) {
        unsigned char c = static_cast<unsigned char>(word[i]);
        size_t len = 1;
        if ((c & 0x80) == 0x00) len = 1;
        else if ((c & 0xe0) == 0xc0) len = 2;
        else if ((c & 0xf0) == 0xe0) len = 3;
        else if ((c & 0xf8) == 0xf0) len = 4;
        i = std::min(word.size(), i + len);
        bounds.push_back(i);
    }
    return bounds;
}

inline std::vector<std::string> utf8_chars(std::string_view word) {
    auto bounds = utf8_boundaries(word);
    std::vector<std::string> chars;
    for (size_t i = 0; i + 1 < bounds.size(); ++i)
        chars.emplace_back(word.substr(bounds[i], bounds[i + 1] - bounds[i]));
    return chars;
}

} // namespace detail

// Builds a subword vocabulary: specials, then all single characters seen,
// then iteratively merged frequent adjacent pairs until target_size is
// reached or no pair count reaches min_freq. Ties break lexicographically on
// the (left, right) pair, so the result is independent of input order.
// Each learned piece is stored in both word-initial and continuation form.
inline Vocab build_vocab(const std::vector<std::string>& corpus_words,
                         size_t target_size, size_t min_freq) {
    if (target_size < 5)
        throw Error(concat("build_vocab: target_size must be >= 5, got ", target_size));
    if (corpus_words.empty()) throw Error("build_vocab: empty corpus");

    std::map<std::string, size_t> word_freq;
    for (const auto& w : corpus_words)
        if (!w.empty()) ++word_freq[w];
    if (word_freq.empty()) throw Error("build_vocab: empty corpus");

    Vocab vocab = Vocab::with_specials();
    const std::string cont(Vocab::kContinuation);

    // Seed with single characters, most frequent first.
    std::map<std::string, size_t> char_freq;
    for (const auto& [word, freq] : word_freq)
        for (auto& c : detail::utf8_chars(word)) char_freq[c] += freq;
    std::vector<std::pair<std::string, size_t>> chars(char_freq.begin(), char_freq.end());
    std::sort(chars.begin(), chars.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    for (const auto& [c, freq] : chars) {
        if (vocab.size() >= target_size) break;
        vocab.add(c);
        if (vocab.size() >= target_size) break;
        vocab.add(cont + c);
    }

    // Words as symbol sequences; merging operates on the raw piece text.
    std::vector<std::vector<std::string>> seqs;
    std::vector<size_t> seq_freq;
    for (const auto& [word, freq] : word_freq) {
        seqs.push_back(detail::utf8_chars(word));
        seq_freq.push_back(freq);
    }

    while (vocab.size() < target_size) {
        std::map<std::pair<std::string, std::string>, size_t> pair_freq;
        for (size_t s = 0; s < seqs.size(); ++s)
            for (size_t i = 0; i + 1 < seqs[s].size(); ++i)
                pair_freq[{seqs[s][i], seqs[s][i + 1]}] += seq_freq[s];
        if (pair_freq.empty()) break;

        auto best = pair_freq.begin();
        for (auto it = pair_freq.begin(); it != pair_freq.end(); ++it)
            if (it->second > best->second) best = it; // ties keep the smaller pair
        if (best->second < min_freq) break;

        const auto& [left, right] = best->first;
        const std::string merged = left + right;
        vocab.add(merged);
        if (vocab.size() < target_size) vocab.add(cont + merged);

        for (auto& seq : seqs) {
            std::vector<std::string> out;
            out.reserve(seq.size());
            size_t i = 0;
            while (i < seq.size()) {
                if (i + 1 < seq.size() && seq[i] == left && seq[i + 1] == right) {
                    out.push_back(merged);
                    i += 2;
                } else {
                    out.push_back(seq[i]);
                    ++i;
                }
            }
            seq = std::move(out);
        }
    }

    return vocab;
}

// Greedy longest-match segmentation. Non-initial pieces carry the
// continuation prefix; a word with no match anywhere becomes a single [UNK].
inline std::vector<std::string> tokenize_word(const std::string& word, const Vocab& v) {
    if (word.empty()) throw Error("tokenize_word: empty word");
    auto bounds = detail::utf8_boundaries(word);
    std::vector<std::string> pieces;
    size_t start = 0; // index into bounds
    const size_t n = bounds.size() - 1;
    while (start < n) {
        size_t end = n;
        std::string match;
        while (end > start) {
            std::string piece = word.substr(bounds[start], bounds[end] - bounds[start]);
            if (start > 0) piece.insert(0, Vocab::kContinuation);
            if (v.contains(piece)) {
                match = std::move(piece);
                break;
            }
            --end;
        }
        if (match.empty()) return {"[UNK]"};
        pieces.push_back(std::move(match));
        start = end;
    }
    return pieces;
}

// One token per line, line number = id, specials first. Reload is bit-exact.
inline void save_vocab(const std::filesystem::path& path, const Vocab& v) {
    std::ofstream os(path);
    if (!os) throw Error(concat("cannot write vocab file: ", path.string()));
    for (const auto& tok : v.token_of) os << tok << '\n';
}

inline Vocab load_vocab(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(concat("cannot open vocab file: ", path.string()));
    Vocab v;
    std::string line;
    while (std::getline(in, line)) v.add(line);
    if (v.size() < 4 || v.token_of[0] != "[PAD]" || v.token_of[1] != "[UNK]" ||
        v.token_of[2] != "[CLS]" || v.token_of[3] != "[SEP]")
        throw Error(concat("vocab file ", path.string(),
                           " does not start with the four special tokens"));
    return v;
}

// A word with its per-objective labels, decoupled from annotation sources.
// head is the 1-based parent index within its own sentence (0 = root);
// syn_label is an id in the dataset's synset label space (0 = no_syn).
struct LabeledWord {
    std::string form;
    int32_t pos_label = kIgnoreLabel;
    int32_t head = 0;
    int32_t syn_label = 0;
};

struct LabeledPair {
    std::string id;
    std::vector<LabeledWord> premise;
    std::vector<LabeledWord> hypothesis;
    NliLabel gold = NliLabel::Neutral;
};

// Token ids, segment ids, word alignment, projected labels and loss mask for
// one encoded pair. Unpadded: padding happens at batch assembly.
struct EncodedSequence {
    std::vector<int32_t> ids;
    std::vector<int32_t> segments;
    std::vector<int32_t> word_of_token; // index into the concatenated word list; -1 for specials
    std::map<Objective, std::vector<int32_t>> labels;
    std::vector<uint8_t> loss_mask; // false exactly on CLS/SEP (and PAD once batched)
    int32_t nli_gold = 0;

    size_t length() const { return ids.size(); }
};

struct EncodeOptions {
    size_t max_len = 64;
    std::set<Objective> objectives; // token objectives to project
    bool first_subtoken_only = false;
};

// Copies word-level labels onto tokens via the word alignment map; special
// positions (word -1) get the ignore label. An out-of-range index is an
// internal bug.
inline std::vector<int32_t> project_labels(const std::vector<int32_t>& word_labels,
                                           const std::vector<int32_t>& word_of_token) {
    std::vector<int32_t> out(word_of_token.size(), kIgnoreLabel);
    for (size_t i = 0; i < word_of_token.size(); ++i) {
        int32_t w = word_of_token[i];
        if (w < 0) continue;
        if (static_cast<size_t>(w) >= word_labels.size())
            throw std::logic_error(concat("project_labels: word index ", w,
                                          " out of range (", word_labels.size(), " labels)"));
        out[i] = word_labels[static_cast<size_t>(w)];
    }
    return out;
}

// Dedicated class for root words in the parent-prediction label space; other
// classes are 0-based word indices into the concatenated pair. The space has
// max_len + 1 classes.
inline int32_t parent_root_class(size_t max_len) { return static_cast<int32_t>(max_len); }
inline int32_t parent_num_classes(size_t max_len) { return static_cast<int32_t>(max_len) + 1; }

// Layout: [CLS] premise [SEP] hypothesis [SEP]; segment 0 through the first
// SEP, 1 after. Pairs longer than max_len are truncated a whole word at a
// time from the end of the currently longer side (ties: hypothesis first).
inline EncodedSequence encode_pair(const LabeledPair& pair, const Vocab& vocab,
                                   const EncodeOptions& opt,
                                   size_t* truncated_pairs = nullptr) {
    if (opt.max_len < 8)
        throw Error(concat("encode_pair: max_len must be >= 8, got ", opt.max_len));

    auto tokenize_side = [&](const std::vector<LabeledWord>& words) {
        std::vector<std::vector<int32_t>> per_word;
        per_word.reserve(words.size());
        for (const auto& w : words) {
            std::vector<int32_t> ids;
            for (const auto& piece : tokenize_word(w.form, vocab)) {
                int32_t id = vocab.lookup(piece);
                ids.push_back(id < 0 ? Vocab::kUnk : id);
            }
            per_word.push_back(std::move(ids));
        }
        return per_word;
    };
    auto prem_toks = tokenize_side(pair.premise);
    auto hyp_toks = tokenize_side(pair.hypothesis);

    auto count = [](const std::vector<std::vector<int32_t>>& side, size_t kept) {
        size_t n = 0;
        for (size_t i = 0; i < kept; ++i) n += side[i].size();
        return n;
    };

    const size_t budget = opt.max_len - 3; // CLS + 2x SEP
    size_t keep_p = prem_toks.size();
    size_t keep_h = hyp_toks.size();
    bool truncated = false;
    while (count(prem_toks, keep_p) + count(hyp_toks, keep_h) > budget) {
        const size_t pn = count(prem_toks, keep_p);
        const size_t hn = count(hyp_toks, keep_h);
        if (pn > hn && keep_p > 0) --keep_p;
        else if (keep_h > 0) --keep_h;
        else if (keep_p > 0) --keep_p;
        else break;
        truncated = true;
    }
    if (keep_p == 0 || keep_h == 0)
        throw Error(concat("encode_pair: pair ", pair.id,
                           " reduced to zero content tokens on one side"));
    if (truncated && truncated_pairs) ++*truncated_pairs;

    const size_t p0 = pair.premise.size(); // hypothesis offset in the concatenated word list

    EncodedSequence seq;
    seq.nli_gold = static_cast<int32_t>(pair.gold);
    auto push = [&seq](int32_t id, int32_t segment, int32_t word) {
        seq.ids.push_back(id);
        seq.segments.push_back(segment);
        seq.word_of_token.push_back(word);
        seq.loss_mask.push_back(word >= 0 ? 1 : 0);
    };

    push(Vocab::kCls, 0, -1);
    for (size_t w = 0; w < keep_p; ++w)
        for (int32_t id : prem_toks[w]) push(id, 0, static_cast<int32_t>(w));
    push(Vocab::kSep, 0, -1);
    for (size_t w = 0; w < keep_h; ++w)
        for (int32_t id : hyp_toks[w]) push(id, 1, static_cast<int32_t>(p0 + w));
    push(Vocab::kSep, 1, -1);

    // Per-word label rows over the full concatenated list (truncation only
    // removes trailing words, so kept indices are unchanged).
    const size_t total_words = p0 + pair.hypothesis.size();
    auto word_at = [&](size_t w) -> const LabeledWord& {
        return w < p0 ? pair.premise[w] : pair.hypothesis[w - p0];
    };
    for (Objective obj : opt.objectives) {
        std::vector<int32_t> word_labels(total_words, kIgnoreLabel);
        for (size_t w = 0; w < total_words; ++w) {
            const LabeledWord& lw = word_at(w);
            switch (obj) {
                case Objective::Pos:
                    word_labels[w] = lw.pos_label;
                    break;
                case Objective::Parent: {
                    if (lw.head == 0) {
                        word_labels[w] = parent_root_class(opt.max_len);
                    } else {
                        size_t head_idx = (w < p0 ? 0 : p0) + static_cast<size_t>(lw.head) - 1;
                        // Heads pointing beyond the label space are ignored.
                        word_labels[w] = head_idx < opt.max_len
                                             ? static_cast<int32_t>(head_idx)
                                             : kIgnoreLabel;
                    }
                    break;
                }
                case Objective::Synset:
                    word_labels[w] = lw.syn_label;
                    break;
                case Objective::Nli:
                    throw Error("encode_pair: NLI is not a token objective");
            }
        }
        auto token_labels = project_labels(word_labels, seq.word_of_token);
        if (opt.first_subtoken_only) {
            int32_t prev_word = -1;
            for (size_t i = 0; i < token_labels.size(); ++i) {
                if (seq.word_of_token[i] >= 0 && seq.word_of_token[i] == prev_word)
                    token_labels[i] = kIgnoreLabel;
                prev_word = seq.word_of_token[i];
            }
        }
        seq.labels[obj] = std::move(token_labels);
    }

    return seq;
}

} // namespace lipt
