#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "lipt/corpus.hpp"
#include "lipt/dataset.hpp"
#include "lipt/tokenizer.hpp"
#include "lipt/wordnet.hpp"

#include "test_util.hpp"

using namespace lipt;
using testutil::TempDir;
using testutil::fixture_path;
using testutil::read_file;

TEST_CASE("merge loop on a single repeated word") {
    // "aaaa" = [a][a][a][a]; best pair (a,a) merges to "aa", then (aa,aa) to
    // "aaaa". With target 8 the vocab fills after the first merge.
    std::vector<std::string> corpus(5, "aaaa");
    Vocab v = build_vocab(corpus, 8, 1);
    CHECK(v.size() == 8);
    CHECK(v.contains("a"));
    CHECK(v.contains("##a"));
    CHECK(v.contains("aa"));
    CHECK(v.contains("##aa"));
    CHECK(tokenize_word("aaaa", v) == std::vector<std::string>{"aa", "##aa"});
}

TEST_CASE("target_size 5 leaves room for exactly one token") {
    std::vector<std::string> corpus(3, "aaaa");
    Vocab v = build_vocab(corpus, 5, 1);
    CHECK(v.size() == 5);
    CHECK(v.token_of[4] == "a");
}

TEST_CASE("vocabulary induction is deterministic") {
    std::vector<std::string> corpus = {"riding", "rides", "rider", "hidden",
                                       "hide",   "side",  "tide",  "riding"};
    Vocab a = build_vocab(corpus, 40, 1);
    Vocab b = build_vocab(corpus, 40, 1);
    CHECK(a.token_of == b.token_of);
    // input order must not matter
    std::vector<std::string> shuffled = {"tide",  "riding", "hide", "rides",
                                         "hidden", "riding", "side", "rider"};
    Vocab c = build_vocab(shuffled, 40, 1);
    CHECK(a.token_of == c.token_of);
}

TEST_CASE("min_freq stops merging of rare pairs") {
    // every word distinct: all pairs have frequency 1 < min_freq 2, so only
    // single characters (and their continuation forms) survive
    std::vector<std::string> corpus = {"ab", "cd", "ef"};
    Vocab v = build_vocab(corpus, 64, 2);
    for (size_t id = 4; id < v.size(); ++id)
        CHECK(v.token_of[id].size() <= std::string("##x").size());
}

TEST_CASE("build_vocab validates inputs") {
    CHECK_THROWS_AS(build_vocab({}, 100, 1), Error);
    CHECK_THROWS_AS(build_vocab({"abc"}, 4, 1), Error);
}

TEST_CASE("greedy longest match follows the continuation convention") {
    Vocab v = Vocab::with_specials();
    for (const char* t : {"we", "##ed", "##ing", "weed", "unrelated"}) v.add(t);

    CHECK(tokenize_word("unrelated", v) == std::vector<std::string>{"unrelated"});
    // longest match first: "weed" wins over "we" at the word start
    CHECK(tokenize_word("weeding", v) ==
          std::vector<std::string>{"weed", "##ing"});
    CHECK(tokenize_word("xyz", v) == std::vector<std::string>{"[UNK]"});
    // a mid-word dead end also yields a single [UNK]
    CHECK(tokenize_word("weedy", v) == std::vector<std::string>{"[UNK]"});
}

TEST_CASE("tokenized pieces reconstruct the word when no UNK is produced") {
    std::vector<std::string> corpus = {"gardening", "gardens", "garden", "harden",
                                       "hardened", "dens",    "dent",   "ardent"};
    Vocab v = build_vocab(corpus, 60, 1);
    std::mt19937_64 rng(7);
    for (const auto& word : corpus) {
        auto pieces = tokenize_word(word, v);
        REQUIRE_FALSE(pieces.empty());
        if (pieces.size() == 1 && pieces[0] == "[UNK]") continue;
        std::string rebuilt;
        for (const auto& p : pieces)
            rebuilt += p.starts_with(Vocab::kContinuation) ? p.substr(2) : p;
        CHECK(rebuilt == word);
    }
}

TEST_CASE("vocab files reload bit-exactly") {
    std::vector<std::string> corpus = {"alpha", "beta", "gamma", "alpha"};
    Vocab v = build_vocab(corpus, 40, 1);
    TempDir dir;
    save_vocab(dir / "vocab.txt", v);
    Vocab r = load_vocab(dir / "vocab.txt");
    CHECK(r.token_of == v.token_of);
    save_vocab(dir / "vocab2.txt", r);
    CHECK(read_file(dir / "vocab.txt") == read_file(dir / "vocab2.txt"));
}

TEST_CASE("project_labels copies word labels onto subtokens") {
    // 1 word, 3 subtokens
    CHECK(project_labels({7}, {-1, 0, 0, 0, -1}) ==
          std::vector<int32_t>{-1, 7, 7, 7, -1});
    // mixed boundaries
    CHECK(project_labels({3, 9}, {0, 0, 1}) == std::vector<int32_t>{3, 3, 9});
    // out of range is an internal bug
    CHECK_THROWS_AS(project_labels({3}, {0, 1}), std::logic_error);
}

static LabeledPair tiny_pair() {
    LabeledPair p;
    p.id = "t";
    p.gold = NliLabel::Entailment;
    p.premise = {{"aa", 1, 2, 0}, {"bb", 2, 0, 3}};
    p.hypothesis = {{"aa", 1, 0, 0}};
    return p;
}

static Vocab tiny_vocab() {
    Vocab v = Vocab::with_specials();
    for (const char* t : {"aa", "bb", "a", "##a", "b", "##b"}) v.add(t);
    return v;
}

TEST_CASE("encode_pair lays out CLS premise SEP hypothesis SEP") {
    EncodeOptions opt;
    opt.max_len = 16;
    opt.objectives = {Objective::Pos, Objective::Parent, Objective::Synset};
    EncodedSequence s = encode_pair(tiny_pair(), tiny_vocab(), opt);

    REQUIRE(s.ids.size() == 6);
    CHECK(s.ids[0] == Vocab::kCls);
    CHECK(s.ids[3] == Vocab::kSep);
    CHECK(s.ids[5] == Vocab::kSep);
    CHECK(s.segments == std::vector<int32_t>{0, 0, 0, 0, 1, 1});
    CHECK(s.word_of_token == std::vector<int32_t>{-1, 0, 1, -1, 2, -1});
    CHECK(s.loss_mask == std::vector<uint8_t>{0, 1, 1, 0, 1, 0});
    CHECK(s.nli_gold == static_cast<int32_t>(NliLabel::Entailment));

    CHECK(s.labels.at(Objective::Pos) == std::vector<int32_t>{-1, 1, 2, -1, 1, -1});
    // premise word 1 heads word 2 (concat index 1), word 2 is root, the
    // hypothesis word is root
    const int32_t root = parent_root_class(opt.max_len);
    CHECK(s.labels.at(Objective::Parent) ==
          std::vector<int32_t>{-1, 1, root, -1, root, -1});
    CHECK(s.labels.at(Objective::Synset) == std::vector<int32_t>{-1, 0, 3, -1, 0, -1});
}

TEST_CASE("all subtokens of a word share one label per objective") {
    LabeledPair p;
    p.id = "multi";
    p.gold = NliLabel::Neutral;
    p.premise = {{"abab", 5, 0, 2}, {"ba", 3, 1, 1}};
    p.hypothesis = {{"aab", 7, 0, 4}};
    Vocab v = Vocab::with_specials();
    for (const char* t : {"a", "##a", "b", "##b", "ab", "##ab"}) v.add(t);
    EncodeOptions opt;
    opt.max_len = 32;
    opt.objectives = {Objective::Pos, Objective::Parent, Objective::Synset};
    EncodedSequence s = encode_pair(p, v, opt);

    for (const auto& [obj, labels] : s.labels) {
        std::map<int32_t, int32_t> label_of_word;
        for (size_t i = 0; i < labels.size(); ++i) {
            const int32_t w = s.word_of_token[i];
            if (w < 0) {
                CHECK(labels[i] == kIgnoreLabel);
                continue;
            }
            auto [it, inserted] = label_of_word.emplace(w, labels[i]);
            if (!inserted) CHECK(it->second == labels[i]);
        }
    }
}

TEST_CASE("encoding is deterministic") {
    EncodeOptions opt;
    opt.max_len = 16;
    opt.objectives = {Objective::Pos};
    EncodedSequence a = encode_pair(tiny_pair(), tiny_vocab(), opt);
    EncodedSequence b = encode_pair(tiny_pair(), tiny_vocab(), opt);
    CHECK(a.ids == b.ids);
    CHECK(a.segments == b.segments);
    CHECK(a.labels.at(Objective::Pos) == b.labels.at(Objective::Pos));
}

TEST_CASE("truncation drops whole words from the longer side first") {
    LabeledPair p;
    p.id = "long";
    p.gold = NliLabel::Contradiction;
    for (int i = 0; i < 8; ++i) p.premise.push_back({"aa", 1, 0, 0});
    p.premise[0].head = 0;
    for (auto& w : p.premise) w.head = 0;
    p.hypothesis = {{"bb", 2, 0, 0}, {"bb", 2, 0, 0}};
    EncodeOptions opt;
    opt.max_len = 8; // budget 5 content tokens
    opt.objectives = {};
    size_t truncated = 0;
    EncodedSequence s = encode_pair(p, tiny_vocab(), opt, &truncated);
    CHECK(truncated == 1);
    CHECK(s.ids.size() <= opt.max_len);
    // premise was longer, so it lost words; hypothesis kept both
    int hyp_words = 0, prem_words = 0;
    for (int32_t w : s.word_of_token) {
        if (w >= 8) ++hyp_words;
        else if (w >= 0) ++prem_words;
    }
    CHECK(prem_words == 3);
    CHECK(hyp_words == 2);
    // loss-mask count equals the subtokens of kept words
    size_t masked_true = 0;
    for (uint8_t m : s.loss_mask) masked_true += m;
    CHECK(masked_true == 5);
}

TEST_CASE("a pair reduced to nothing on one side is an error") {
    LabeledPair p;
    p.id = "zero";
    p.gold = NliLabel::Neutral;
    for (int i = 0; i < 40; ++i) p.premise.push_back({"aa", 1, 0, 0});
    p.hypothesis = {{"bb", 2, 0, 0}};
    EncodeOptions opt;
    opt.max_len = 8;
    // hypothesis-first-on-ties whittles the hypothesis away entirely
    LabeledPair q = p;
    q.hypothesis.clear();
    CHECK_THROWS_WITH(encode_pair(q, tiny_vocab(), opt),
                      Catch::Matchers::ContainsSubstring("zero content tokens"));
    CHECK_THROWS_AS(encode_pair(p, tiny_vocab(), EncodeOptions{4, {}, false}), Error);
}

TEST_CASE("first_subtoken_only restricts labels to word-initial pieces") {
    LabeledPair p;
    p.id = "fso";
    p.gold = NliLabel::Neutral;
    p.premise = {{"aaa", 4, 0, 2}};
    p.hypothesis = {{"bb", 5, 0, 1}};
    Vocab v = Vocab::with_specials();
    for (const char* t : {"a", "##a", "bb"}) v.add(t);
    EncodeOptions opt;
    opt.max_len = 16;
    opt.objectives = {Objective::Pos};
    opt.first_subtoken_only = true;
    EncodedSequence s = encode_pair(p, v, opt);
    CHECK(s.labels.at(Objective::Pos) ==
          std::vector<int32_t>{-1, 4, -1, -1, -1, 5, -1});
}

// The worked examples: both reference sentences, driven end to end through
// corpus + wordnet + tokenizer with the fixture vocabulary.
TEST_CASE("reference sentences produce the expected label rows") {
    auto corpus = load_nli_corpus(fixture_path("paper_sentences/pairs.jsonl"),
                                  CorpusFormat::Jsonl);
    auto prem = load_conllu(fixture_path("paper_sentences/pairs.premise.conllu"));
    auto hyp = load_conllu(fixture_path("paper_sentences/pairs.hypothesis.conllu"));
    WordnetIndex wn = load_wordnet(fixture_path("wordnet_mini"), true);
    auto merged = merge_annotations(corpus.pairs, prem, hyp, wn);
    REQUIRE(merged.pairs.size() == 2);
    Vocab v = load_vocab(fixture_path("paper_sentences/vocab_paper.txt"));

    EncodeOptions opt;
    opt.max_len = 64;
    opt.objectives = {Objective::Pos, Objective::Synset};
    SynsetSpace space;

    SECTION("synset row over subtokens") {
        EncodedSequence s = encode_pair(merged.pairs[0], v, opt, space);
        // premise tokens: [CLS] The lady is we ##ed ##ing her garden . [SEP]
        std::vector<std::string> expected = {
            "no_syn", "lady.n.01", "be.v.01", "weed.v.01", "weed.v.01",
            "weed.v.01", "no_syn", "garden.n.01", "no_syn"};
        const auto& syn = s.labels.at(Objective::Synset);
        REQUIRE(s.ids.size() >= expected.size() + 2);
        for (size_t i = 0; i < expected.size(); ++i) {
            const int32_t id = syn[i + 1]; // skip CLS
            REQUIRE(id >= 0);
            CHECK(space.names[static_cast<size_t>(id)] == expected[i]);
        }
    }

    SECTION("POS row over subtokens") {
        EncodedSequence s = encode_pair(merged.pairs[1], v, opt, space);
        // premise tokens: A person on a horse jump ##s over a broken down
        //                 air ##plan ##e .
        std::vector<Upos> expected = {Upos::Det,  Upos::Noun, Upos::Adp,  Upos::Det,
                                      Upos::Noun, Upos::Verb, Upos::Verb, Upos::Adp,
                                      Upos::Det,  Upos::Verb, Upos::Adp,  Upos::Noun,
                                      Upos::Noun, Upos::Noun, Upos::Punct};
        const auto& pos = s.labels.at(Objective::Pos);
        for (size_t i = 0; i < expected.size(); ++i)
            CHECK(pos[i + 1] == static_cast<int32_t>(expected[i]));
        // check the split tokens really are jump ##s and air ##plan ##e
        CHECK(v.token_of[static_cast<size_t>(s.ids[6])] == "jump");
        CHECK(v.token_of[static_cast<size_t>(s.ids[7])] == "##s");
        CHECK(v.token_of[static_cast<size_t>(s.ids[12])] == "air");
        CHECK(v.token_of[static_cast<size_t>(s.ids[13])] == "##plan");
        CHECK(v.token_of[static_cast<size_t>(s.ids[14])] == "##e");
    }
}
