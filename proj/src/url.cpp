#include "ssoaudit/url.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace ssoaudit {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool valid_scheme(std::string_view s) {
    if (s.empty() || !std::isalpha(static_cast<unsigned char>(s[0]))) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '+' || c == '-' || c == '.';
    });
}

int default_port(std::string_view scheme) {
    if (scheme == "http" || scheme == "ws") return 80;
    if (scheme == "https" || scheme == "wss") return 443;
    return -1;
}

// Removes "." and ".." segments.
std::string normalize_path(std::string_view path) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    bool absolute = !path.empty() && path[0] == '/';
    if (absolute) pos = 1;
    bool trailing = false;
    while (pos <= path.size()) {
        std::size_t slash = path.find('/', pos);
        if (slash == std::string_view::npos) slash = path.size();
        std::string_view seg = path.substr(pos, slash - pos);
        trailing = false;
        if (seg == ".") {
            trailing = true;
        } else if (seg == "..") {
            if (!out.empty()) out.pop_back();
            trailing = true;
        } else {
            out.push_back(seg);
        }
        pos = slash + 1;
    }
    std::string result = absolute ? "/" : "";
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (i) result += '/';
        result += out[i];
    }
    if (trailing && !result.empty() && result.back() != '/') result += '/';
    return result;
}

} // namespace

std::string Url::origin() const {
    std::string out = scheme + "://" + host;
    if (port && *port != default_port(scheme)) out += ":" + std::to_string(*port);
    return out;
}

std::string Url::without_query() const { return origin() + path; }

std::string Url::to_string() const {
    std::string out = scheme + "://";
    if (!userinfo.empty()) out += userinfo + "@";
    out += host;
    if (port) out += ":" + std::to_string(*port);
    out += path;
    if (query) out += "?" + *query;
    if (fragment) out += "#" + *fragment;
    return out;
}

int Url::effective_port() const { return port ? *port : default_port(scheme); }

std::optional<Url> parse_url(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    std::string_view scheme = text.substr(0, colon);
    if (!valid_scheme(scheme)) return std::nullopt;
    if (text.substr(colon + 1, 2) != "//") return std::nullopt;

    Url url;
    url.scheme = lower(scheme);
    std::string_view rest = text.substr(colon + 3);

    std::size_t auth_end = rest.find_first_of("/?#");
    if (auth_end == std::string_view::npos) auth_end = rest.size();
    std::string_view authority = rest.substr(0, auth_end);
    rest = rest.substr(auth_end);

    if (auto at = authority.rfind('@'); at != std::string_view::npos) {
        url.userinfo = std::string(authority.substr(0, at));
        authority = authority.substr(at + 1);
    }
    std::string_view hostport = authority;
    std::string_view port_text;
    if (!hostport.empty() && hostport[0] == '[') {
        auto close = hostport.find(']');
        if (close == std::string_view::npos) return std::nullopt;
        if (close + 1 < hostport.size()) {
            if (hostport[close + 1] != ':') return std::nullopt;
            port_text = hostport.substr(close + 2);
        }
        hostport = hostport.substr(0, close + 1);
    } else if (auto pc = hostport.rfind(':'); pc != std::string_view::npos) {
        port_text = hostport.substr(pc + 1);
        hostport = hostport.substr(0, pc);
    }
    if (hostport.empty()) return std::nullopt;
    for (unsigned char c : hostport) {
        if (std::isspace(c) || c == '%' || c == '\\' || c == '<' || c == '>' || c == '"') return std::nullopt;
    }
    url.host = lower(hostport);
    if (!port_text.empty()) {
        int p = 0;
        auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), p);
        if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || p < 0 || p > 65535)
            return std::nullopt;
        url.port = p;
    }

    std::size_t hash = rest.find('#');
    if (hash != std::string_view::npos) {
        url.fragment = std::string(rest.substr(hash + 1));
        rest = rest.substr(0, hash);
    }
    std::size_t q = rest.find('?');
    if (q != std::string_view::npos) {
        url.query = std::string(rest.substr(q + 1));
        rest = rest.substr(0, q);
    }
    url.path = std::string(rest);
    return url;
}

bool is_http_url(std::string_view text) {
    auto url = parse_url(text);
    return url && (url->scheme == "http" || url->scheme == "https");
}

std::optional<std::string> resolve_url(std::string_view base, std::string_view ref) {
    if (parse_url(ref)) return std::string(ref);
    auto b = parse_url(base);
    if (!b) return std::nullopt;
    if (ref.substr(0, 2) == "//") return b->scheme + ":" + std::string(ref);

    Url out = *b;
    out.fragment.reset();
    std::string_view r = ref;
    std::optional<std::string> fragment;
    if (auto h = r.find('#'); h != std::string_view::npos) {
        fragment = std::string(r.substr(h + 1));
        r = r.substr(0, h);
    }
    std::optional<std::string> query;
    if (auto q = r.find('?'); q != std::string_view::npos) {
        query = std::string(r.substr(q + 1));
        r = r.substr(0, q);
    }
    if (r.empty()) {
        if (query) out.query = query;
    } else {
        if (r[0] == '/') {
            out.path = normalize_path(r);
        } else {
            std::string dir = b->path.substr(0, b->path.rfind('/') == std::string::npos ? 0 : b->path.rfind('/') + 1);
            if (dir.empty()) dir = "/";
            out.path = normalize_path(dir + std::string(r));
        }
        out.query = query;
    }
    out.fragment = fragment;
    return out.to_string();
}

std::string strip_fragment(std::string_view url) {
    auto h = url.find('#');
    return std::string(url.substr(0, h));
}

bool url_has_prefix(const Url& candidate, const Url& prefix) {
    if (candidate.scheme != prefix.scheme || candidate.host != prefix.host ||
        candidate.effective_port() != prefix.effective_port())
        return false;
    std::string_view want = prefix.path.empty() ? "/" : std::string_view(prefix.path);
    std::string_view have = candidate.path.empty() ? "/" : std::string_view(candidate.path);
    return have.substr(0, want.size()) == want;
}

bool is_loopback_host(std::string_view host) {
    if (host == "localhost" || host == "[::1]") return true;
    if (host.size() > 10 && host.substr(host.size() - 10) == ".localhost") return true;
    return host.substr(0, 4) == "127." &&
           std::all_of(host.begin(), host.end(), [](unsigned char c) { return std::isdigit(c) || c == '.'; });
}

std::vector<codec::Pair> query_pairs(const Url& url) {
    if (!url.query) return {};
    return codec::form_decode(*url.query);
}

} // namespace ssoaudit
