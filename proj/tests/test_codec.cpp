#include <doctest.h>

#include <random>

#include "ssoaudit/codec.hpp"

using namespace ssoaudit::codec;

TEST_CASE("percent decoding") {
    CHECK(percent_decode("%7B%22r%22%3A%22x%22%7D") == R"({"r":"x"})");
    CHECK(percent_decode("a+b") == "a+b");
    CHECK(percent_decode("a+b", true) == "a b");
    CHECK(percent_decode("100%") == "100%");
    CHECK(percent_decode("%zz%4") == "%zz%4");
    CHECK(has_percent_escape("x%41"));
    CHECK_FALSE(has_percent_escape("x%4"));
}

TEST_CASE("percent encoding keeps the unreserved set") {
    CHECK(percent_encode("AZaz09-._~") == "AZaz09-._~");
    CHECK(percent_encode("a b/c?d") == "a%20b%2Fc%3Fd");
    std::mt19937 rng(1);
    for (int i = 0; i < 200; ++i) {
        std::string s;
        for (int n = rng() % 40; n > 0; --n) s += static_cast<char>(rng() % 256);
        CHECK(percent_decode(percent_encode(s)) == s);
    }
}

TEST_CASE("form encoding") {
    auto pairs = form_decode("a=1&b=x%20y&c&d=e+f");
    REQUIRE(pairs.size() == 4);
    CHECK(pairs[0] == Pair{"a", "1"});
    CHECK(pairs[1] == Pair{"b", "x y"});
    CHECK(pairs[2] == Pair{"c", ""});
    CHECK(pairs[3] == Pair{"d", "e f"});
    std::vector<Pair> in = {{"redirect_uri", "https://a.example/cb?x=1&y=2"}, {"k", "v w"}};
    CHECK(form_decode(form_encode(in)) == in);
}

TEST_CASE("base64 strictness") {
    CHECK(base64_encode("hello") == "aGVsbG8=");
    CHECK(base64url_encode("\xfb\xff") == "-_8");
    CHECK(base64_decode("aGVsbG8=", Base64Alphabet::standard) == "hello");
    CHECK(base64_decode("aGVsbG8", Base64Alphabet::standard) == "hello");
    CHECK(base64_decode("-_8", Base64Alphabet::url) == "\xfb\xff");
    CHECK_FALSE(base64_decode("-_8", Base64Alphabet::standard));
    CHECK_FALSE(base64_decode("aGVsb", Base64Alphabet::standard));     // impossible length
    CHECK_FALSE(base64_decode("aGVsbG9=", Base64Alphabet::standard));  // leftover bits set
    CHECK_FALSE(base64_decode("aG=VsbG8", Base64Alphabet::standard));
}

TEST_CASE("printable utf-8") {
    CHECK(is_printable_utf8("plain text\twith tab\n"));
    CHECK(is_printable_utf8("gr\xc3\xbc\xc3\x9f"));
    CHECK_FALSE(is_printable_utf8(std::string("a\0b", 3)));
    CHECK_FALSE(is_printable_utf8("\xc0\xaf"));          // overlong
    CHECK_FALSE(is_printable_utf8("\xed\xa0\x80"));      // surrogate
    CHECK_FALSE(is_printable_utf8("\xe2\x82"));          // truncated
}
