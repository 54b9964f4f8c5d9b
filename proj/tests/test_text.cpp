#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "sii/text.hpp"

using namespace sii;

TEST_CASE("trim handles ascii and nbsp") {
    CHECK(trim("  a b \t") == "a b");
    CHECK(trim("") == "");
    CHECK(trim(" \n ") == "");
    CHECK(trim("\xC2\xA0x\xC2\xA0") == "x");
}

TEST_CASE("normalize_whitespace collapses runs") {
    CHECK(normalize_whitespace("a\t b\n\nc") == "a b c");
    CHECK(normalize_whitespace("  leading and trailing  ") == "leading and trailing");
    CHECK(normalize_whitespace("a\xC2\xA0ритм") == "a ритм");
}

TEST_CASE("split_words and count_words") {
    auto words = split_words(" TiO2-c  mesoporous\nTiO2 ");
    CHECK(words == std::vector<std::string>{"TiO2-c", "mesoporous", "TiO2"});
    CHECK(count_words("one two  three") == 3);
    CHECK(count_words("") == 0);
}

TEST_CASE("split_on_separators honors longest match and dedup") {
    std::vector<std::string> seps = {";", "|", ":", ">>"};
    CHECK(split_on_separators("a >> b", seps) == std::vector<std::string>{"a", "b"});
    CHECK(split_on_separators("x:y;x", seps) == std::vector<std::string>{"x", "y"});
    CHECK(split_on_separators("::;;", seps).empty());
}

TEST_CASE("split_lines") {
    CHECK(split_lines("a\nb\r\nc") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_lines("a\n") == std::vector<std::string>{"a"});
    CHECK(split_lines("") == std::vector<std::string>{""});
}

TEST_CASE("replace_all and iequals") {
    CHECK(replace_all("spin-coating then spin-coating", "spin-coating", "spin-coated") ==
          "spin-coated then spin-coated");
    CHECK(iequals("Unknown", "unknown"));
    CHECK_FALSE(iequals("Unknown", "known"));
}

TEST_CASE("fnv1a64 is stable") {
    CHECK(fnv1a64_hex("") == "cbf29ce484222325");
    CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a64_hex("abc") != fnv1a64_hex("acb"));
}
