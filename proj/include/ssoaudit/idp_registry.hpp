#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ssoaudit/url.hpp"

namespace ssoaudit {

// Endpoint patterns are "host/path" prefixes compared segment by segment; a
// "*" segment matches any single path segment ("www.facebook.com/*/dialog/oauth").
struct IdpEntry {
    std::string name;
    std::vector<std::string> authorization_endpoints;
    std::vector<std::string> token_endpoints;
    // Registrable domains operated by the IdP besides its endpoint hosts.
    std::vector<std::string> domains;
};

class IdpRegistry {
public:
    IdpRegistry() = default;
    explicit IdpRegistry(std::vector<IdpEntry> idps) : idps_(std::move(idps)) {}

    // Google, Facebook and Apple.
    static IdpRegistry defaults();
    // {"idps": [{"name", "authorization_endpoints", "token_endpoints", "domains"}]}
    static IdpRegistry from_json(std::string_view text);
    std::string to_json() const;

    const std::vector<IdpEntry>& idps() const { return idps_; }

    const IdpEntry* find(std::string_view name) const;  // case-insensitive
    const IdpEntry* match_authorization(const Url& url) const;
    const IdpEntry* match_token(const Url& url) const;
    // IdP owning the host's registrable domain.
    const IdpEntry* owner_of_host(std::string_view host) const;

    // Registrable domains of every endpoint host plus the extra domains.
    std::vector<std::string> domains_of(const IdpEntry& idp) const;

private:
    std::vector<IdpEntry> idps_;
};

bool endpoint_matches(std::string_view pattern, const Url& url);

} // namespace ssoaudit
