#pragma once

// Dataset plumbing between annotation and training: the synset label space,
// the line-delimited annotated-pair file (labels.ldj), conversion of merged
// annotations into label rows, batching, and deterministic dev splits.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipt/common.hpp"
#include "lipt/corpus.hpp"
#include "lipt/model.hpp"
#include "lipt/tokenizer.hpp"
#include "lipt/types.hpp"
#include "lipt/wordnet.hpp"

namespace lipt {

// Dataset-level inventory of synset classes. Id 0 is always no_syn; other
// ids are assigned in interning order, keyed by the stable (pos, offset)
// serialization with the display name kept when known.
struct SynsetSpace {
    std::vector<std::string> keys;  // "no_syn", "n:100", ...
    std::vector<std::string> names; // "no_syn", "lady.n.01", ...
    std::map<std::string, int32_t> id_of_key;

    SynsetSpace() { intern_raw("no_syn", "no_syn"); }

    int32_t intern_raw(const std::string& key, const std::string& name) {
        auto it = id_of_key.find(key);
        if (it != id_of_key.end()) return it->second;
        int32_t id = static_cast<int32_t>(keys.size());
        keys.push_back(key);
        names.push_back(name);
        id_of_key.emplace(key, id);
        return id;
    }

    int32_t intern(const SynsetLabel& label) {
        if (label.is_no_syn()) return 0;
        return intern_raw(label.key_string(), label.name());
    }

    // -1 when the label is not part of the space.
    int32_t lookup(const SynsetLabel& label) const {
        auto it = id_of_key.find(label.key_string());
        return it == id_of_key.end() ? -1 : it->second;
    }

    size_t size() const { return keys.size(); }
};

// Converts a merged annotated pair into per-word label rows, interning
// synset labels (or mapping unknown ones to no_syn when interning is off,
// e.g. for evaluation splits encoded against a fixed space).
inline LabeledPair to_labeled_pair(const AnnotatedPair& ap, SynsetSpace& space,
                                   bool intern = true) {
    auto convert = [&](const AnnotatedSentence& s, const std::vector<SynsetLabel>& syn) {
        std::vector<LabeledWord> out;
        out.reserve(s.words.size());
        for (size_t i = 0; i < s.words.size(); ++i) {
            LabeledWord w;
            w.form = s.words[i].form;
            w.pos_label = static_cast<int32_t>(s.words[i].upos);
            w.head = s.words[i].head;
            if (intern) {
                w.syn_label = space.intern(syn[i]);
            } else {
                int32_t id = space.lookup(syn[i]);
                w.syn_label = id < 0 ? 0 : id;
            }
            out.push_back(std::move(w));
        }
        return out;
    };
    LabeledPair lp;
    lp.id = ap.pair.id;
    lp.gold = ap.pair.gold;
    lp.premise = convert(ap.premise_ann, ap.premise_syn);
    lp.hypothesis = convert(ap.hypothesis_ann, ap.hypothesis_syn);
    return lp;
}

// Spec-shaped convenience overload: encodes a merged annotated pair directly.
inline EncodedSequence encode_pair(const AnnotatedPair& ap, const Vocab& vocab,
                                   const EncodeOptions& opt, SynsetSpace& space,
                                   size_t* truncated_pairs = nullptr) {
    return encode_pair(to_labeled_pair(ap, space), vocab, opt, truncated_pairs);
}

// ---- labels.ldj: one header line, then one record per pair ----

inline void write_labels_file(const std::filesystem::path& path,
                              const std::vector<LabeledPair>& pairs,
                              const SynsetSpace& space) {
    std::ofstream os(path);
    if (!os) throw Error(concat("cannot write labels file: ", path.string()));

    nlohmann::json header;
    header["format"] = "lipt.labels";
    header["version"] = 1;
    nlohmann::json upos = nlohmann::json::array();
    for (auto name : upos_names()) upos.push_back(std::string(name));
    header["upos"] = upos;
    header["nli"] = {"contradiction", "entailment", "neutral"};
    nlohmann::json synsets = nlohmann::json::array();
    for (size_t i = 0; i < space.size(); ++i) {
        nlohmann::json s;
        s["key"] = space.keys[i];
        if (space.names[i] != space.keys[i]) s["name"] = space.names[i];
        synsets.push_back(std::move(s));
    }
    header["synsets"] = synsets;
    os << header.dump() << '\n';

    auto side_json = [](const std::vector<LabeledWord>& words) {
        nlohmann::json j;
        auto& forms = j["forms"] = nlohmann::json::array();
        auto& pos = j["pos"] = nlohmann::json::array();
        auto& head = j["head"] = nlohmann::json::array();
        auto& syn = j["syn"] = nlohmann::json::array();
        for (const auto& w : words) {
            forms.push_back(w.form);
            pos.push_back(w.pos_label);
            head.push_back(w.head);
            syn.push_back(w.syn_label);
        }
        return j;
    };
    for (const auto& p : pairs) {
        nlohmann::json j;
        j["id"] = p.id;
        j["gold"] = std::string(to_string(p.gold));
        j["premise"] = side_json(p.premise);
        j["hypothesis"] = side_json(p.hypothesis);
        os << j.dump() << '\n';
    }
}

struct LabelsFile {
    SynsetSpace space;
    std::vector<LabeledPair> pairs;
};

inline LabelsFile read_labels_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(concat("cannot open labels file: ", path.string()));

    std::string line;
    if (!std::getline(in, line))
        throw ParseError(concat(path.string(), ": empty labels file"));
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "lipt.labels")
        throw ParseError(concat(path.string(), ": not a lipt.labels file"));
    if (header.value("version", 0) != 1)
        throw ParseError(concat(path.string(), ": unsupported labels version"));

    LabelsFile out;
    out.space = SynsetSpace();
    bool first = true;
    for (const auto& s : header.at("synsets")) {
        std::string key = s.at("key").get<std::string>();
        if (first) {
            if (key != "no_syn")
                throw ParseError(concat(path.string(), ": synset id 0 must be no_syn"));
            first = false;
            continue;
        }
        out.space.intern_raw(key, s.value("name", key));
    }

    auto side_from_json = [&](const nlohmann::json& j, size_t line_no) {
        const auto& forms = j.at("forms");
        const auto& pos = j.at("pos");
        const auto& head = j.at("head");
        const auto& syn = j.at("syn");
        if (forms.size() != pos.size() || forms.size() != head.size() ||
            forms.size() != syn.size())
            throw ParseError(concat(path.string(), ":", line_no,
                                    ": label arrays have differing lengths"));
        std::vector<LabeledWord> words;
        words.reserve(forms.size());
        for (size_t i = 0; i < forms.size(); ++i) {
            LabeledWord w;
            w.form = forms[i].get<std::string>();
            w.pos_label = pos[i].get<int32_t>();
            if (w.pos_label < 0 || w.pos_label >= kNumUpos)
                throw ParseError(concat(path.string(), ":", line_no, ": POS label ",
                                        w.pos_label, " out of range"));
            w.head = head[i].get<int32_t>();
            if (w.head < 0 || static_cast<size_t>(w.head) > forms.size())
                throw ParseError(concat(path.string(), ":", line_no, ": head ",
                                        w.head, " out of range"));
            w.syn_label = syn[i].get<int32_t>();
            if (w.syn_label < 0 || static_cast<size_t>(w.syn_label) >= out.space.size())
                throw ParseError(concat(path.string(), ":", line_no, ": synset label ",
                                        w.syn_label, " out of range"));
            words.push_back(std::move(w));
        }
        return words;
    };

    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ParseError(concat(path.string(), ":", line_no, ": malformed JSON record"));
        LabeledPair p;
        p.id = j.value("id", concat("line-", line_no));
        if (!nli_label_from_string(j.at("gold").get<std::string>(), p.gold))
            throw ParseError(concat(path.string(), ":", line_no, ": bad gold label"));
        p.premise = side_from_json(j.at("premise"), line_no);
        p.hypothesis = side_from_json(j.at("hypothesis"), line_no);
        out.pairs.push_back(std::move(p));
    }
    return out;
}

// ---- encoding and batching ----

struct EncodedDataset {
    std::vector<EncodedSequence> seqs;
    size_t truncated_pairs = 0;
    size_t failed_pairs = 0;
};

inline EncodedDataset encode_dataset(const std::vector<LabeledPair>& pairs,
                                     const Vocab& vocab, const EncodeOptions& opt) {
    EncodedDataset out;
    out.seqs.reserve(pairs.size());
    for (const auto& p : pairs) {
        try {
            out.seqs.push_back(encode_pair(p, vocab, opt, &out.truncated_pairs));
        } catch (const Error& e) {
            ++out.failed_pairs;
            log_debug(concat("encode: ", e.what()));
        }
    }
    return out;
}

// Pads a group of encoded sequences to the longest length in the group.
inline Batch make_batch(std::span<const EncodedSequence> seqs) {
    if (seqs.empty()) throw Error("make_batch: empty batch");
    Batch b;
    b.batch = seqs.size();
    b.len = 0;
    for (const auto& s : seqs) b.len = std::max(b.len, s.length());

    const size_t R = b.batch * b.len;
    b.ids.assign(R, Vocab::kPad);
    b.segments.assign(R, 0);
    b.attn_mask.assign(R, 0);
    b.loss_mask.assign(R, 0);
    for (const auto& [obj, labels] : seqs.front().labels)
        b.labels[obj].assign(R, kIgnoreLabel);
    b.nli_gold.resize(b.batch);

    for (size_t i = 0; i < seqs.size(); ++i) {
        const auto& s = seqs[i];
        const size_t base = i * b.len;
        for (size_t t = 0; t < s.length(); ++t) {
            b.ids[base + t] = s.ids[t];
            b.segments[base + t] = s.segments[t];
            b.attn_mask[base + t] = 1;
            b.loss_mask[base + t] = s.loss_mask[t];
        }
        for (const auto& [obj, labels] : s.labels) {
            auto it = b.labels.find(obj);
            if (it == b.labels.end()) throw Error("make_batch: inconsistent label sets");
            for (size_t t = 0; t < labels.size(); ++t) it->second[base + t] = labels[t];
        }
        b.nli_gold[i] = s.nli_gold;
    }
    return b;
}

// Deterministic dev split: shuffles indices with the split seed and takes
// the first dev_fraction share as dev.
inline std::pair<std::vector<size_t>, std::vector<size_t>>
split_indices(size_t n, double dev_fraction, uint64_t split_seed) {
    if (dev_fraction < 0.0 || dev_fraction >= 1.0)
        throw ConfigError("dev_fraction must be in [0, 1)");
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(split_seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const size_t dev_n = static_cast<size_t>(static_cast<double>(n) * dev_fraction);
    std::vector<size_t> dev(idx.begin(), idx.begin() + static_cast<long>(dev_n));
    std::vector<size_t> train(idx.begin() + static_cast<long>(dev_n), idx.end());
    std::sort(dev.begin(), dev.end());
    std::sort(train.begin(), train.end());
    return {train, dev};
}

} // namespace lipt
