#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Byte-level codecs shared by the URL model and SPAR.
namespace ssoaudit::codec {

using Pair = std::pair<std::string, std::string>;

// Decodes %XX escapes. Malformed escapes are copied through unchanged.
// With plus_as_space, '+' decodes to ' ' (application/x-www-form-urlencoded).
std::string percent_decode(std::string_view in, bool plus_as_space = false);

// Encodes everything outside the RFC 3986 unreserved set.
std::string percent_encode(std::string_view in);

// True if the input contains at least one well-formed %XX escape.
bool has_percent_escape(std::string_view in);

// Splits "k=v&k2=v2" into decoded pairs. Pairs without '=' get an empty value.
std::vector<Pair> form_decode(std::string_view in);
std::string form_encode(const std::vector<Pair>& pairs);

std::string base64_encode(std::string_view bytes);
std::string base64url_encode(std::string_view bytes);  // unpadded

enum class Base64Alphabet { standard, url };

// Strict decode: rejects characters outside the alphabet, misplaced padding
// and impossible lengths. Padding is optional.
std::optional<std::string> base64_decode(std::string_view in, Base64Alphabet alphabet);

// Valid UTF-8 without control characters other than tab, CR and LF.
bool is_printable_utf8(std::string_view bytes);

} // namespace ssoaudit::codec
