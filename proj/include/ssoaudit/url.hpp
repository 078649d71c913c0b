#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "ssoaudit/codec.hpp"

namespace ssoaudit {

// An absolute hierarchical URL split into its components. Components are kept
// as they appear on the wire (no percent-decoding).
struct Url {
    std::string scheme;  // lowercased
    std::string userinfo;
    std::string host;  // lowercased; IPv6 literals keep their brackets
    std::optional<int> port;
    std::string path;
    std::optional<std::string> query;
    std::optional<std::string> fragment;

    // scheme://host[:port]
    std::string origin() const;
    // scheme://host[:port]/path, without query and fragment
    std::string without_query() const;
    std::string to_string() const;
    int effective_port() const;

    bool is_https() const { return scheme == "https"; }
};

// Parses "scheme://authority/path?query#fragment". Returns nullopt for
// relative references and for URLs without a host.
std::optional<Url> parse_url(std::string_view text);

// True for absolute http(s) URLs with a non-empty host.
bool is_http_url(std::string_view text);

// Resolves a reference (as found in a Location header) against a base URL.
std::optional<std::string> resolve_url(std::string_view base, std::string_view reference);

// Drops the fragment.
std::string strip_fragment(std::string_view url);

// True when candidate has the same scheme, host and port as prefix and its
// path starts with prefix's path. Query and fragment of prefix are ignored.
bool url_has_prefix(const Url& candidate, const Url& prefix);

bool is_loopback_host(std::string_view host);

// Query string pairs decoded with form rules.
std::vector<codec::Pair> query_pairs(const Url& url);

} // namespace ssoaudit
