#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <regex>

#include "lipt/wordnet.hpp"

#include "test_util.hpp"

using namespace lipt;
using testutil::TempDir;
using testutil::fixture_path;
using testutil::write_file;

static WordnetIndex load_fixture(bool with_data = true) {
    return load_wordnet(fixture_path("wordnet_mini"), with_data);
}

TEST_CASE("index entries keep sense order, most frequent first") {
    WordnetIndex idx = load_fixture();
    const auto* lady = idx.find("lady", WnPos::Noun);
    REQUIRE(lady != nullptr);
    REQUIRE(lady->size() == 3);
    CHECK((*lady)[0].offset == 100);
    CHECK((*lady)[1].offset == 200);
    CHECK((*lady)[2].offset == 300);
    // The shared synset 200 is dame's second sense, so it renders as such.
    CHECK((*lady)[0].display == "lady.n.01");
    CHECK((*lady)[1].display == "dame.n.02");
    CHECK((*lady)[2].display == "lady.n.03");
}

TEST_CASE("display names match the lemma.pos.NN pattern") {
    WordnetIndex idx = load_fixture();
    std::regex pattern(R"([a-z0-9_'.-]+\.[nvar]\.[0-9]{2})");
    for (const auto& [key, senses] : idx.entries)
        for (const auto& s : senses) {
            REQUIRE(!s.display.empty());
            CHECK(std::regex_match(s.display, pattern));
        }
}

TEST_CASE("missing index files are fatal") {
    TempDir dir;
    CHECK_THROWS_WITH(load_wordnet(dir.path(), false),
                      Catch::Matchers::ContainsSubstring("missing index file"));
}

TEST_CASE("offsets parse exactly from a hand-written index") {
    TempDir dir;
    write_file(dir / "index.noun",
               "  1 header line\n"
               "apple n 2 0 2 0 00012345 00099001\n"
               "tree n 1 0 1 0 00000042\n");
    write_file(dir / "index.verb", "run v 1 0 1 0 00000007\n");
    write_file(dir / "index.adj", "");
    write_file(dir / "index.adv", "");
    WordnetIndex idx = load_wordnet(dir.path(), false);
    const auto* apple = idx.find("apple", WnPos::Noun);
    REQUIRE(apple != nullptr);
    REQUIRE(apple->size() == 2);
    CHECK((*apple)[0].offset == 12345);
    CHECK((*apple)[1].offset == 99001);
    CHECK(idx.find("tree", WnPos::Noun)->front().offset == 42);
    CHECK(idx.find("run", WnPos::Verb)->front().offset == 7);
    CHECK(idx.stats.malformed_skipped == 0);
}

TEST_CASE("malformed lines are skipped and counted, not fatal") {
    TempDir dir;
    write_file(dir / "index.noun",
               "apple n 2 0 2 0 00012345 00099001\n"
               "shortline n\n"                        // truncated
               "badoffset n 1 0 1 0 0001x345\n"       // non-numeric offset
               "badcount n 2 0 1 0 00012345\n"        // sense_cnt != synset_cnt
               "tree n 1 0 1 0 00000042\n");
    write_file(dir / "index.verb", "");
    write_file(dir / "index.adj", "");
    write_file(dir / "index.adv", "");
    WordnetIndex idx = load_wordnet(dir.path(), false);
    CHECK(idx.entries.size() == 2);
    CHECK(idx.stats.malformed_skipped == 3);
}

TEST_CASE("index offsets must resolve in data files when data is loaded") {
    TempDir dir;
    write_file(dir / "index.noun", "apple n 1 0 1 0 00012345\n");
    write_file(dir / "index.verb", "");
    write_file(dir / "index.adj", "");
    write_file(dir / "index.adv", "");
    write_file(dir / "data.noun", "00099999 18 n 01 apple 0 000 | wrong offset\n");
    write_file(dir / "data.verb", "");
    write_file(dir / "data.adj", "");
    write_file(dir / "data.adv", "");
    CHECK_THROWS_WITH(load_wordnet(dir.path(), true),
                      Catch::Matchers::ContainsSubstring("absent from data.noun"));
    CHECK_NOTHROW(load_wordnet(dir.path(), false));
}

TEST_CASE("morphy applies exceptions, then detachment rules, then the form") {
    WordnetIndex idx = load_fixture();

    auto weeding = morphy(idx, "weeding", WnPos::Verb);
    REQUIRE_FALSE(weeding.empty());
    CHECK(std::find(weeding.begin(), weeding.end(), "weed") != weeding.end());

    auto horses = morphy(idx, "horses", WnPos::Noun);
    REQUIRE(horses.size() == 1);
    CHECK(horses[0] == "horse");

    CHECK(morphy(idx, "qqqq", WnPos::Noun).empty());

    // exception list comes first
    auto is = morphy(idx, "is", WnPos::Verb);
    REQUIRE_FALSE(is.empty());
    CHECK(is[0] == "be");
    auto better = morphy(idx, "better", WnPos::Adj);
    REQUIRE_FALSE(better.empty());
    CHECK(better[0] == "good");

    // a plain lemma resolves to itself
    auto garden = morphy(idx, "garden", WnPos::Noun);
    REQUIRE(garden.size() == 1);
    CHECK(garden[0] == "garden");
}

TEST_CASE("morphy candidates from rules always exist in the index") {
    WordnetIndex idx = load_fixture();
    const std::string suffixes[] = {"s", "es", "ed", "ing", "ies", "er", "est", "men"};
    for (const auto& [key, senses] : idx.entries) {
        for (const auto& suffix : suffixes) {
            if (idx.exceptions.count({key.first + suffix, key.second})) continue;
            for (const auto& cand : morphy(idx, key.first + suffix, key.second))
                CHECK(idx.find(cand, key.second) != nullptr);
        }
    }
}

TEST_CASE("first_synset returns the head of the ordered sense list") {
    WordnetIndex idx = load_fixture();
    for (const auto& [key, senses] : idx.entries) {
        SynsetLabel label = first_synset(idx, key.first, key.second);
        REQUIRE_FALSE(label.is_no_syn());
        CHECK(label.synset() == senses.front());
    }
    CHECK(first_synset(idx, "lady", WnPos::Noun).name() == "lady.n.01");
    CHECK(first_synset(idx, "dame", WnPos::Noun).name() == "dame.n.01");
    CHECK(first_synset(idx, "zzzz", WnPos::Noun).is_no_syn());
}

TEST_CASE("synset labels for words follow the reference examples") {
    WordnetIndex idx = load_fixture();
    CHECK(synset_label_for_word(idx, "is", Upos::Aux).name() == "be.v.01");
    CHECK(synset_label_for_word(idx, "is", Upos::Verb).name() == "be.v.01");
    CHECK(synset_label_for_word(idx, "her", Upos::Pron).is_no_syn());
    CHECK(synset_label_for_word(idx, "garden", Upos::Noun).name() == "garden.n.01");
    CHECK(synset_label_for_word(idx, "weeding", Upos::Verb).name() == "weed.v.01");
    CHECK(synset_label_for_word(idx, "The", Upos::Det).is_no_syn());
    CHECK(synset_label_for_word(idx, "Lady", Upos::Noun).name() == "lady.n.01");
    CHECK(synset_label_for_word(idx, "broken", Upos::Adj).name() == "broken.a.01");
}

TEST_CASE("closed-class tags always map to no_syn") {
    WordnetIndex idx = load_fixture();
    const Upos closed[] = {Upos::Det,   Upos::Adp,   Upos::Pron, Upos::Punct,
                           Upos::Cconj, Upos::Sconj, Upos::Part, Upos::Sym,
                           Upos::Num,   Upos::X,     Upos::Intj};
    for (Upos tag : closed) {
        // even for forms that do have noun/verb synsets
        CHECK(synset_label_for_word(idx, "lady", tag).is_no_syn());
        CHECK(synset_label_for_word(idx, "be", tag).is_no_syn());
    }
}

TEST_CASE("adverb extraction is controlled by include_adverbs") {
    WordnetIndex idx = load_fixture();
    CHECK(synset_label_for_word(idx, "quickly", Upos::Adv, true).name() == "quickly.r.01");
    CHECK(synset_label_for_word(idx, "quickly", Upos::Adv, false).is_no_syn());
}

TEST_CASE("loading without data files yields keys without display names") {
    WordnetIndex idx = load_fixture(false);
    SynsetLabel label = first_synset(idx, "lady", WnPos::Noun);
    REQUIRE_FALSE(label.is_no_syn());
    CHECK(label.synset().display.empty());
    CHECK(label.key_string() == "n:100");
    CHECK(label.name() == "n:100");
}

TEST_CASE("first_synset is deterministic across loads") {
    WordnetIndex a = load_fixture();
    WordnetIndex b = load_fixture();
    for (const auto& [key, senses] : a.entries)
        CHECK(first_synset(a, key.first, key.second) ==
              first_synset(b, key.first, key.second));
}

TEST_CASE("missing exception files are tolerated") {
    TempDir dir;
    write_file(dir / "index.noun", "apple n 1 0 1 0 00012345\n");
    write_file(dir / "index.verb", "");
    write_file(dir / "index.adj", "");
    write_file(dir / "index.adv", "");
    WordnetIndex idx = load_wordnet(dir.path(), false);
    CHECK(idx.stats.missing_exception_files == 4);
    CHECK(morphy(idx, "apples", WnPos::Noun) == std::vector<std::string>{"apple"});
}
