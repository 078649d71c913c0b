#include <doctest.h>

#include "ssoaudit/domain.hpp"
#include "ssoaudit/url.hpp"

using namespace ssoaudit;

TEST_CASE("url parsing") {
    auto u = parse_url("HTTPS://User@Accounts.Google.com:443/o/oauth2/v2/auth?client_id=c#frag");
    REQUIRE(u);
    CHECK(u->scheme == "https");
    CHECK(u->host == "accounts.google.com");
    CHECK(u->userinfo == "User");
    CHECK(u->port == 443);
    CHECK(u->path == "/o/oauth2/v2/auth");
    CHECK(u->query == "client_id=c");
    CHECK(u->fragment == "frag");
    CHECK(u->origin() == "https://accounts.google.com");
    CHECK(u->without_query() == "https://accounts.google.com/o/oauth2/v2/auth");

    CHECK_FALSE(parse_url("/relative/path"));
    CHECK_FALSE(parse_url("https:///nohost"));
    CHECK(parse_url("http://[::1]:8080/cb")->host == "[::1]");
    CHECK(is_http_url("http://a.example"));
    CHECK_FALSE(is_http_url("ftp://a.example/x"));
}

TEST_CASE("reference resolution") {
    CHECK(resolve_url("https://a.example/x/y?q", "/cb?code=1") == "https://a.example/cb?code=1");
    CHECK(resolve_url("https://a.example/x/y", "z") == "https://a.example/x/z");
    CHECK(resolve_url("https://a.example/x/y", "../z") == "https://a.example/z");
    CHECK(resolve_url("https://a.example/x", "//b.example/p") == "https://b.example/p");
    CHECK(resolve_url("https://a.example/x", "https://c.example/") == "https://c.example/");
}

TEST_CASE("prefix matching ignores query and fragment of the prefix") {
    auto prefix = *parse_url("https://a.example/cb?next=1");
    CHECK(url_has_prefix(*parse_url("https://a.example/cb?code=x"), prefix));
    CHECK(url_has_prefix(*parse_url("https://a.example/cb/more"), prefix));
    CHECK_FALSE(url_has_prefix(*parse_url("http://a.example/cb"), prefix));
    CHECK_FALSE(url_has_prefix(*parse_url("https://a.example:8443/cb"), prefix));
    CHECK_FALSE(url_has_prefix(*parse_url("https://b.example/cb"), prefix));
    // plain string prefix on the path, as registered redirect URIs are matched
    CHECK(url_has_prefix(*parse_url("https://a.example/cbx"), prefix));
    CHECK_FALSE(url_has_prefix(*parse_url("https://a.example/c"), prefix));
}

TEST_CASE("loopback hosts") {
    CHECK(is_loopback_host("127.0.0.1"));
    CHECK(is_loopback_host("127.9.9.9"));
    CHECK(is_loopback_host("localhost"));
    CHECK(is_loopback_host("[::1]"));
    CHECK_FALSE(is_loopback_host("128.0.0.1"));
    CHECK_FALSE(is_loopback_host("localhost.example"));
}

TEST_CASE("registrable domains") {
    CHECK(registrable_domain("www.reddit.com") == "reddit.com");
    CHECK(registrable_domain("a.b.bbc.co.uk") == "bbc.co.uk");
    CHECK(registrable_domain("reddit.com") == "reddit.com");
    CHECK(registrable_domain("127.0.0.1") == "127.0.0.1");
    CHECK(public_suffix("bbc.co.uk") == "co.uk");
    CHECK(same_site("login.reddit.com", "www.reddit.com"));
    CHECK_FALSE(same_site("reddit.com", "twitter.com"));
    CHECK(is_valid_hostname("a-b.example"));
    CHECK_FALSE(is_valid_hostname(""));
    CHECK_FALSE(is_valid_hostname("-a.example"));
    CHECK_FALSE(is_valid_hostname("a..example"));
}
