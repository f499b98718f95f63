#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "lipt/corpus.hpp"

#include "test_util.hpp"

using namespace lipt;
using testutil::TempDir;
using testutil::fixture_path;
using testutil::write_file;

TEST_CASE("jsonl pairs map fields directly") {
    TempDir dir;
    write_file(dir / "c.jsonl",
               R"({"gold_label":"contradiction","sentence1":"A","sentence2":"B"})"
               "\n"
               R"({"gold_label":"entailment","sentence1":"C x","sentence2":"D y","pairID":"p7","extra":1})"
               "\n");
    auto res = load_nli_corpus(dir / "c.jsonl", CorpusFormat::Jsonl);
    REQUIRE(res.pairs.size() == 2);
    CHECK(res.pairs[0].gold == NliLabel::Contradiction);
    CHECK(res.pairs[0].premise == "A");
    CHECK(res.pairs[0].hypothesis == "B");
    CHECK(res.pairs[1].id == "p7");
    CHECK(res.skipped == 0);
}

TEST_CASE("lines without an annotator majority are skipped and counted") {
    TempDir dir;
    write_file(dir / "c.jsonl",
               R"({"gold_label":"-","sentence1":"A","sentence2":"B"})"
               "\n"
               R"({"gold_label":"neutral","sentence1":"A","sentence2":"B"})"
               "\n"
               "this is not json\n"
               R"({"gold_label":"entailment","sentence1":"  ","sentence2":"B"})"
               "\n");
    auto res = load_nli_corpus(dir / "c.jsonl", CorpusFormat::Jsonl);
    CHECK(res.pairs.size() == 1);
    CHECK(res.skipped == 3);
    CHECK(res.total_lines == 4);
    CHECK(res.pairs.size() + res.skipped == res.total_lines);
    REQUIRE(res.skip_log.size() == 3);
    CHECK(res.skip_log[0].find("line 1") != std::string::npos);
}

TEST_CASE("a corpus with zero valid pairs is fatal") {
    TempDir dir;
    write_file(dir / "empty.jsonl", "");
    CHECK_THROWS_WITH(load_nli_corpus(dir / "empty.jsonl", CorpusFormat::Jsonl),
                      Catch::Matchers::ContainsSubstring("no valid pairs"));
    write_file(dir / "bad.jsonl", R"({"gold_label":"-","sentence1":"A","sentence2":"B"})"
                                  "\n");
    CHECK_THROWS_WITH(load_nli_corpus(dir / "bad.jsonl", CorpusFormat::Jsonl),
                      Catch::Matchers::ContainsSubstring("no valid pairs"));
}

TEST_CASE("tsv corpus has a header row and three columns") {
    TempDir dir;
    write_file(dir / "c.tsv",
               "gold\tpremise\thypothesis\n"
               "entailment\tA dog runs .\tAn animal runs .\n"
               "bogus\tA\tB\n"
               "neutral\tonly two columns\n"
               "contradiction\tA cat sits .\tA cat stands .\n");
    auto res = load_nli_corpus(dir / "c.tsv", CorpusFormat::Tsv);
    REQUIRE(res.pairs.size() == 2);
    CHECK(res.pairs[0].gold == NliLabel::Entailment);
    CHECK(res.pairs[1].gold == NliLabel::Contradiction);
    CHECK(res.skipped == 3); // header + bad label + bad column count
    CHECK(res.pairs.size() + res.skipped == res.total_lines);
}

TEST_CASE("conllu loads a minimal valid tree") {
    TempDir dir;
    write_file(dir / "a.conllu",
               "1\tDogs\tdog\tNOUN\t_\t_\t2\t_\t_\t_\n"
               "2\tbark\tbark\tVERB\t_\t_\t0\t_\t_\t_\n"
               "\n");
    auto sents = load_conllu(dir / "a.conllu");
    REQUIRE(sents.size() == 1);
    REQUIRE(sents[0].words.size() == 2);
    CHECK(sents[0].words[0].form == "Dogs");
    CHECK(sents[0].words[0].head == 2);
    CHECK(sents[0].words[1].head == 0);
    CHECK(sents[0].words[0].lemma == "dog");
}

TEST_CASE("conllu skips comments, ranges and empty nodes") {
    TempDir dir;
    write_file(dir / "a.conllu",
               "# sent_id = 1\n"
               "1-2\tcannot\t_\t_\t_\t_\t_\t_\t_\t_\n"
               "1\tcan\tcan\tAUX\t_\t_\t0\t_\t_\t_\n"
               "2\tnot\tnot\tPART\t_\t_\t1\t_\t_\t_\n"
               "2.1\telided\t_\tX\t_\t_\t_\t_\t_\t_\n"
               "\n");
    auto sents = load_conllu(dir / "a.conllu");
    REQUIRE(sents.size() == 1);
    CHECK(sents[0].words.size() == 2);
}

TEST_CASE("the reference premise file parses with the expected tags") {
    auto sents = load_conllu(fixture_path("paper_sentences/pairs.premise.conllu"));
    REQUIRE(sents.size() == 2);
    const auto& s = sents[1];
    std::vector<Upos> expected = {Upos::Det, Upos::Noun, Upos::Adp,  Upos::Det,
                                  Upos::Noun, Upos::Verb, Upos::Adp, Upos::Det,
                                  Upos::Verb, Upos::Adp,  Upos::Noun, Upos::Punct};
    REQUIRE(s.words.size() == expected.size());
    for (size_t i = 0; i < expected.size(); ++i) CHECK(s.words[i].upos == expected[i]);
    CHECK(s.words[5].form == "jumps");
    CHECK(s.words[5].head == 0);
}

TEST_CASE("head-graph violations are reported with context") {
    TempDir dir;
    SECTION("2-cycle") {
        write_file(dir / "a.conllu",
                   "1\ta\t_\tDET\t_\t_\t2\t_\t_\t_\n"
                   "2\tb\t_\tNOUN\t_\t_\t1\t_\t_\t_\n"
                   "3\tc\t_\tVERB\t_\t_\t0\t_\t_\t_\n"
                   "\n");
        CHECK_THROWS_WITH(load_conllu(dir / "a.conllu"),
                          Catch::Matchers::ContainsSubstring("cyclic head graph"));
    }
    SECTION("cycle with no root") {
        write_file(dir / "a.conllu",
                   "1\ta\t_\tDET\t_\t_\t2\t_\t_\t_\n"
                   "2\tb\t_\tNOUN\t_\t_\t1\t_\t_\t_\n"
                   "\n");
        CHECK_THROWS_WITH(load_conllu(dir / "a.conllu"),
                          Catch::Matchers::ContainsSubstring("cyclic head graph"));
    }
    SECTION("multiple roots") {
        write_file(dir / "a.conllu",
                   "1\ta\t_\tDET\t_\t_\t0\t_\t_\t_\n"
                   "2\tb\t_\tNOUN\t_\t_\t0\t_\t_\t_\n"
                   "\n");
        CHECK_THROWS_WITH(load_conllu(dir / "a.conllu"),
                          Catch::Matchers::ContainsSubstring("multiple roots"));
    }
    SECTION("head out of range") {
        write_file(dir / "a.conllu",
                   "1\ta\t_\tDET\t_\t_\t9\t_\t_\t_\n"
                   "2\tb\t_\tNOUN\t_\t_\t0\t_\t_\t_\n"
                   "\n");
        CHECK_THROWS_WITH(load_conllu(dir / "a.conllu"),
                          Catch::Matchers::ContainsSubstring("out of range"));
    }
    SECTION("self-headed word") {
        write_file(dir / "a.conllu",
                   "1\ta\t_\tDET\t_\t_\t1\t_\t_\t_\n"
                   "2\tb\t_\tNOUN\t_\t_\t0\t_\t_\t_\n"
                   "\n");
        CHECK_THROWS_WITH(load_conllu(dir / "a.conllu"),
                          Catch::Matchers::ContainsSubstring("its own head"));
    }
    SECTION("non-integer head") {
        write_file(dir / "a.conllu",
                   "1\ta\t_\tDET\t_\t_\tX\t_\t_\t_\n"
                   "\n");
        CHECK_THROWS_WITH(load_conllu(dir / "a.conllu"),
                          Catch::Matchers::ContainsSubstring("non-integer HEAD"));
    }
    SECTION("wrong column count") {
        write_file(dir / "a.conllu", "1\ta\tDET\t0\n\n");
        CHECK_THROWS_WITH(load_conllu(dir / "a.conllu"),
                          Catch::Matchers::ContainsSubstring("expected 10 columns"));
    }
    SECTION("unknown UPOS tag") {
        write_file(dir / "a.conllu", "1\ta\t_\tBLORB\t_\t_\t0\t_\t_\t_\n\n");
        CHECK_THROWS_WITH(load_conllu(dir / "a.conllu"),
                          Catch::Matchers::ContainsSubstring("unknown UPOS"));
    }
    SECTION("out-of-sequence token id") {
        write_file(dir / "a.conllu",
                   "1\ta\t_\tDET\t_\t_\t0\t_\t_\t_\n"
                   "3\tb\t_\tNOUN\t_\t_\t1\t_\t_\t_\n"
                   "\n");
        CHECK_THROWS_WITH(load_conllu(dir / "a.conllu"),
                          Catch::Matchers::ContainsSubstring("expected 2"));
    }
}

TEST_CASE("every loaded tree reaches the root within n steps") {
    auto sents = load_conllu(fixture_path("paper_sentences/pairs.premise.conllu"));
    for (const auto& s : sents) {
        int roots = 0;
        for (const auto& w : s.words)
            if (w.head == 0) ++roots;
        CHECK(roots == 1);
        for (size_t i = 0; i < s.words.size(); ++i) {
            int cur = static_cast<int>(i) + 1;
            size_t steps = 0;
            while (cur != 0 && steps <= s.words.size()) {
                cur = s.words[static_cast<size_t>(cur - 1)].head;
                ++steps;
            }
            CHECK(cur == 0);
            CHECK(steps <= s.words.size());
        }
    }
}

TEST_CASE("write + reload is a fixed point on FORM/UPOS/HEAD") {
    auto sents = load_conllu(fixture_path("paper_sentences/pairs.premise.conllu"));
    TempDir dir;
    write_conllu(dir / "round.conllu", sents);
    auto reloaded = load_conllu(dir / "round.conllu");
    REQUIRE(reloaded.size() == sents.size());
    for (size_t s = 0; s < sents.size(); ++s) {
        REQUIRE(reloaded[s].words.size() == sents[s].words.size());
        for (size_t i = 0; i < sents[s].words.size(); ++i) {
            CHECK(reloaded[s].words[i].form == sents[s].words[i].form);
            CHECK(reloaded[s].words[i].upos == sents[s].words[i].upos);
            CHECK(reloaded[s].words[i].head == sents[s].words[i].head);
        }
    }
    // and a second write produces identical bytes
    std::ostringstream first, second;
    write_conllu(first, sents);
    write_conllu(second, reloaded);
    CHECK(first.str() == second.str());
}

static WordnetIndex mini_wordnet() {
    return load_wordnet(fixture_path("wordnet_mini"), true);
}

TEST_CASE("merge fills synset labels for every word") {
    auto corpus = load_nli_corpus(fixture_path("paper_sentences/pairs.jsonl"),
                                  CorpusFormat::Jsonl);
    auto prem = load_conllu(fixture_path("paper_sentences/pairs.premise.conllu"));
    auto hyp = load_conllu(fixture_path("paper_sentences/pairs.hypothesis.conllu"));
    WordnetIndex wn = mini_wordnet();
    auto merged = merge_annotations(corpus.pairs, prem, hyp, wn);
    REQUIRE(merged.pairs.size() == 2);
    CHECK(merged.dropped == 0);

    const auto& ap = merged.pairs[0];
    REQUIRE(ap.premise_syn.size() == ap.premise_ann.words.size());
    REQUIRE(ap.hypothesis_syn.size() == ap.hypothesis_ann.words.size());
    std::vector<std::string> expected = {"no_syn",  "lady.n.01", "be.v.01", "weed.v.01",
                                         "no_syn", "garden.n.01", "no_syn"};
    for (size_t i = 0; i < expected.size(); ++i)
        CHECK(ap.premise_syn[i].name() == expected[i]);
}

TEST_CASE("merge drops pairs whose word counts disagree") {
    std::vector<NliPair> pairs = {
        {"p1", "a dog", "a dog", NliLabel::Entailment},
        {"p2", "three words here", "a dog", NliLabel::Neutral},
    };
    AnnotatedSentence two;
    two.words = {{"a", Upos::Det, 2, {}}, {"dog", Upos::Noun, 0, {}}};
    std::vector<AnnotatedSentence> prem = {two, two}; // p2 premise mismatches
    std::vector<AnnotatedSentence> hyp = {two, two};
    WordnetIndex wn = mini_wordnet();
    auto merged = merge_annotations(pairs, prem, hyp, wn);
    CHECK(merged.pairs.size() == 1);
    CHECK(merged.dropped == 1);
    REQUIRE(merged.warnings.size() == 1);
    CHECK(merged.warnings[0].find("p2") != std::string::npos);
}

TEST_CASE("merge with misaligned annotation lists is fatal") {
    std::vector<NliPair> pairs = {{"p1", "a dog", "a dog", NliLabel::Entailment}};
    WordnetIndex wn = mini_wordnet();
    CHECK_THROWS_WITH(merge_annotations(pairs, {}, {}, wn),
                      Catch::Matchers::ContainsSubstring("count mismatch"));
}

TEST_CASE("jsonl writer round-trips through the loader") {
    std::vector<NliPair> pairs = {
        {"x1", "A man walks .", "A person walks .", NliLabel::Entailment},
        {"x2", "A man walks .", "Nobody walks .", NliLabel::Contradiction},
    };
    TempDir dir;
    write_nli_jsonl(dir / "out.jsonl", pairs);
    auto res = load_nli_corpus(dir / "out.jsonl", CorpusFormat::Jsonl);
    REQUIRE(res.pairs.size() == 2);
    CHECK(res.pairs[0].id == "x1");
    CHECK(res.pairs[0].premise == pairs[0].premise);
    CHECK(res.pairs[1].gold == NliLabel::Contradiction);
}
