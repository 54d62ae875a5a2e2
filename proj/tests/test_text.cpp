#include <catch2/catch_amalgamated.hpp>

#include "elu/text.hpp"

using namespace elu;

TEST_CASE("word split peels sentence punctuation") {
    auto w = text::words("Where was Elara Vancross born?");
    REQUIRE(w == std::vector<std::string>{"Where", "was", "Elara", "Vancross", "born", "?"});
    REQUIRE(text::words("I don't know.") ==
            std::vector<std::string>{"I", "don't", "know", "."});
}

TEST_CASE("join_words inverts words() on generated text") {
    for (const std::string s : {"Elara was born in Avaria.", "Which genre does X write in?",
                                "I don't know.", "Check a b Options A Yes B No"}) {
        REQUIRE(text::join_words(text::words(s)) == s);
    }
}

TEST_CASE("normalize lowercases, strips punctuation, collapses whitespace") {
    REQUIRE(text::normalize("  Where WAS   Elara born?! ") == "where was elara born");
    REQUIRE(text::normalize("a.b,c") == "a b c");
    REQUIRE(text::normalize("") == "");
}

TEST_CASE("contains_name is verbatim at word level") {
    REQUIRE(text::contains_name("Where was Elara Vancross born?", "Elara Vancross"));
    REQUIRE_FALSE(text::contains_name("Where was Elara born?", "Elara Vancross"));
    REQUIRE_FALSE(text::contains_name("Omaren writes.", "Maren"));
}
