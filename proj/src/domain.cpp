#include "ssoaudit/domain.hpp"

#include <algorithm>
#include <iterator>
#include <cctype>

namespace ssoaudit {

namespace {

// Multi-label public suffixes that commonly show up in top-site lists.
constexpr std::string_view kMultiLabelSuffixes[] = {
    "ac.in",         "ac.jp",        "ac.kr",       "ac.uk",        "appspot.com", "azurewebsites.net",
    "blogspot.com",  "cloudfront.net", "co.id",     "co.il",        "co.in",       "co.jp",
    "co.kr",         "co.nz",        "co.th",       "co.uk",        "co.za",       "com.ar",
    "com.au",        "com.bd",       "com.br",      "com.cn",       "com.co",      "com.eg",
    "com.hk",        "com.mx",       "com.my",      "com.ng",       "com.pe",      "com.ph",
    "com.pk",        "com.sa",       "com.sg",      "com.tr",       "com.tw",      "com.ua",
    "com.vn",        "edu.au",       "edu.cn",      "fastly.net",   "firebaseapp.com", "github.io",
    "gitlab.io",     "go.jp",        "go.kr",       "gov.au",       "gov.br",      "gov.cn",
    "gov.in",        "gov.uk",       "herokuapp.com", "ltd.uk",     "me.uk",       "ne.jp",
    "net.au",        "net.br",       "net.cn",      "netlify.app",  "or.jp",       "or.kr",
    "org.au",        "org.br",       "org.cn",      "org.in",       "org.mx",      "org.nz",
    "org.uk",        "org.za",       "pages.dev",   "plc.uk",       "sch.uk",      "vercel.app",
    "web.app",       "workers.dev",  "co.ve",       "com.pl",
};

bool is_suffix_listed(std::string_view s) {
    return std::find(std::begin(kMultiLabelSuffixes), std::end(kMultiLabelSuffixes), s) !=
           std::end(kMultiLabelSuffixes);
}

bool is_ip_literal(std::string_view host) {
    if (!host.empty() && host.front() == '[') return true;
    return !host.empty() &&
           std::all_of(host.begin(), host.end(), [](unsigned char c) { return std::isdigit(c) || c == '.'; });
}

std::string_view trim_dot(std::string_view host) {
    if (!host.empty() && host.back() == '.') host.remove_suffix(1);
    return host;
}

} // namespace

bool is_valid_hostname(std::string_view host) {
    host = trim_dot(host);
    if (host.empty() || host.size() > 253) return false;
    std::size_t pos = 0;
    while (pos <= host.size()) {
        std::size_t dot = host.find('.', pos);
        if (dot == std::string_view::npos) dot = host.size();
        std::string_view label = host.substr(pos, dot - pos);
        if (label.empty() || label.size() > 63) return false;
        if (label.front() == '-' || label.back() == '-') return false;
        for (unsigned char c : label) {
            if (!(std::isalnum(c) || c == '-')) return false;
        }
        pos = dot + 1;
    }
    return true;
}

std::string public_suffix(std::string_view host) {
    host = trim_dot(host);
    auto last = host.rfind('.');
    if (last == std::string_view::npos) return std::string(host);
    if (last > 0) {
        auto second = host.rfind('.', last - 1);
        std::string_view two = second == std::string_view::npos ? host : host.substr(second + 1);
        if (is_suffix_listed(two)) return std::string(two);
    }
    return std::string(host.substr(last + 1));
}

std::string registrable_domain(std::string_view host) {
    host = trim_dot(host);
    if (is_ip_literal(host)) return std::string(host);
    std::string suffix = public_suffix(host);
    if (suffix.size() >= host.size()) return std::string(host);
    std::string_view head = host.substr(0, host.size() - suffix.size() - 1);
    auto dot = head.rfind('.');
    std::string_view label = dot == std::string_view::npos ? head : head.substr(dot + 1);
    return std::string(label) + "." + suffix;
}

bool same_site(std::string_view a, std::string_view b) { return registrable_domain(a) == registrable_domain(b); }

} // namespace ssoaudit
