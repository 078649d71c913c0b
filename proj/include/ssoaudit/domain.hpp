#pragma once

#include <string>
#include <string_view>

namespace ssoaudit {

// Syntactic hostname check: dot-separated LDH labels, 1..63 chars each.
bool is_valid_hostname(std::string_view host);

// Public suffix of a hostname ("co.uk" for "www.bbc.co.uk"). Uses a built-in
// list of multi-label suffixes; any other host falls back to its last label.
std::string public_suffix(std::string_view host);

// eTLD+1 ("bbc.co.uk" for "www.bbc.co.uk"). IP literals, single-label hosts
// and bare public suffixes are returned unchanged.
std::string registrable_domain(std::string_view host);

bool same_site(std::string_view host_a, std::string_view host_b);

} // namespace ssoaudit
