#include <doctest.h>

#include <random>

#include "eor/domain.hpp"

using namespace eor;

TEST_SUITE("domain") {

TEST_CASE("normalize_answer examples") {
    CHECK(normalize_answer("") == "");
    CHECK(normalize_answer("The Eiffel Tower!") == "eiffel tower");
    CHECK(normalize_answer("an  Apple") == "apple");
    CHECK(normalize_answer("  A\tcat, the dog ") == "cat dog");
    CHECK(normalize_answer("theory") == "theory");  // article only as a whole token
}

TEST_CASE("normalize_answer is idempotent") {
    std::mt19937 rng(11);
    const std::string alphabet = "abcAB THE an.,!?'-\t";
    for (int i = 0; i < 500; ++i) {
        std::string s;
        const int len = static_cast<int>(rng() % 24);
        for (int j = 0; j < len; ++j) s += alphabet[rng() % alphabet.size()];
        const auto once = normalize_answer(s);
        CHECK(normalize_answer(once) == once);
    }
}

TEST_CASE("contains_answer examples") {
    const std::vector<std::string> paris{"Paris"};
    CHECK(contains_answer("Paris is the capital", paris));
    CHECK_FALSE(contains_answer("", paris));
    const std::vector<std::string> tower{"Eiffel Tower"};
    CHECK(contains_answer("the EIFFEL tower opened", tower));
}

TEST_CASE("contains_answer matches whole token runs only") {
    const std::vector<std::string> a{"art"};
    CHECK_FALSE(contains_answer("a party started", a));
    const std::vector<std::string> b{"new york"};
    CHECK(contains_answer("from New York, city", b));
    CHECK_FALSE(contains_answer("new jersey york", b));
}

TEST_CASE("contains_answer ignores case and inserted articles") {
    const std::vector<std::string> al{"eiffel tower"};
    CHECK(contains_answer("THE Eiffel Tower", al));
    const std::vector<std::string> art{"The Eiffel Tower"};
    CHECK(contains_answer("eiffel tower", art));
    CHECK(contains_answer("an eiffel the tower", al));
}

TEST_CASE("empty alias never matches") {
    const std::vector<std::string> empty{"", "the"};
    CHECK_FALSE(contains_answer("anything at all", empty));
    CHECK_FALSE(contains_answer("", empty));
}

TEST_CASE("query and gold set invariants") {
    CHECK_THROWS_AS(Query("q1", ""), Error);
    CHECK_THROWS_AS(GoldAnswerSet({}), Error);
    GoldAnswerSet g({"Paris", "paris.", "PARIS", "Paris, France"});
    REQUIRE(g.aliases().size() == 2);
    CHECK(g.aliases()[0] == "Paris");
    CHECK(g.aliases()[1] == "Paris, France");
}

TEST_CASE("document text joins chunks with newline") {
    Document d({Chunk{"one", SourceTag::Search, {}}, Chunk{"two", SourceTag::Wiki, 0.5}});
    CHECK(d.text() == "one\ntwo");
    CHECK(Document().text().empty());
    const GoldAnswerSet g({"two"});
    CHECK(contains_answer(d, g));
}

TEST_CASE("candidate answer token count") {
    CHECK(CandidateAnswer(0, "The Eiffel  Tower").token_count == 2);
    CHECK(CandidateAnswer(1, "").token_count == 0);
    CHECK(token_count("a b c d e f") == 5);  // leading article dropped
}

TEST_CASE("indicator matrix validates shape and entries") {
    CHECK_THROWS_AS(IndicatorMatrix({"a"}, {"x", "y"}, {1}), Error);
    CHECK_THROWS_AS(IndicatorMatrix({"a"}, {"x"}, {2}), Error);
    IndicatorMatrix m({"a", "b"}, {"x", "y"}, {1, 0, 0, 1});
    CHECK(m.at(1, 1) == 1);
    CHECK(m.column(0) == std::vector<std::uint8_t>{1, 0});
    CHECK(m == IndicatorMatrix({"a", "b"}, {"x", "y"}, {1, 0, 0, 1}));
}

TEST_CASE("source tag names round-trip") {
    for (auto t : {SourceTag::Search, SourceTag::Wiki, SourceTag::Parametric}) {
        CHECK(source_tag_from_string(to_string(t)) == t);
    }
    CHECK_THROWS_AS(source_tag_from_string("web"), Error);
}

TEST_CASE("exact_match_any") {
    const std::vector<std::string> al{"Paris", "City of Light"};
    CHECK(exact_match_any("paris.", al));
    CHECK(exact_match_any("the city of light", al));
    CHECK_FALSE(exact_match_any("Paris France", al));
}

}
