#include "ssoaudit/spar.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <unordered_set>

#include <json.hpp>

#include "ssoaudit/url.hpp"

namespace ssoaudit::spar {

namespace {

using json = nlohmann::json;

struct Part {
    std::string key;
    std::string raw;
    bool url_component = false;  // query/fragment of a nested URL
    bool opaque = false;         // never decoded further (JWT signature)
};

struct Candidate {
    Decoding decoding;
    std::vector<Part> parts;
};

constexpr std::size_t kMinBase64Length = 8;

bool is_base64url_char(unsigned char c) { return std::isalnum(c) || c == '-' || c == '_'; }

bool has_space(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::optional<Candidate> try_jwt(std::string_view s) {
    auto d1 = s.find('.');
    if (d1 == std::string_view::npos) return std::nullopt;
    auto d2 = s.find('.', d1 + 1);
    if (d2 == std::string_view::npos || s.find('.', d2 + 1) != std::string_view::npos) return std::nullopt;
    std::string_view header = s.substr(0, d1);
    std::string_view payload = s.substr(d1 + 1, d2 - d1 - 1);
    std::string_view signature = s.substr(d2 + 1);
    if (header.empty() || payload.empty()) return std::nullopt;
    for (std::string_view part : {header, payload, signature}) {
        if (!std::all_of(part.begin(), part.end(), [](unsigned char c) { return is_base64url_char(c); }))
            return std::nullopt;
    }
    auto header_text = codec::base64_decode(header, codec::Base64Alphabet::url);
    if (!header_text) return std::nullopt;
    json header_json = json::parse(*header_text, nullptr, false);
    if (header_json.is_discarded() || !header_json.is_object() || !header_json.contains("alg")) return std::nullopt;
    auto payload_text = codec::base64_decode(payload, codec::Base64Alphabet::url);
    if (!payload_text) return std::nullopt;
    return Candidate{Decoding::jwt,
                     {{"header", std::move(*header_text)},
                      {"payload", std::move(*payload_text)},
                      {"signature", std::string(signature), false, true}}};
}

std::optional<Candidate> try_json(std::string_view s) {
    auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos || (s[first] != '{' && s[first] != '[')) return std::nullopt;
    auto doc = nlohmann::ordered_json::parse(s, nullptr, false);
    if (doc.is_discarded() || doc.empty()) return std::nullopt;
    Candidate c{Decoding::json, {}};
    auto raw_of = [](const nlohmann::ordered_json& v) {
        return v.is_string() ? v.get<std::string>()
                             : v.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
    };
    if (doc.is_object()) {
        for (auto it = doc.begin(); it != doc.end(); ++it) c.parts.push_back({it.key(), raw_of(it.value())});
    } else {
        std::size_t i = 0;
        for (const auto& v : doc) c.parts.push_back({std::to_string(i++), raw_of(v)});
    }
    return c;
}

bool is_form_key_char(unsigned char c) {
    if (std::isalnum(c)) return true;
    switch (c) {
    case '_': case '-': case '.': case '~': case '%': case '+': case '[': case ']':
    case '*': case '$': case '!': case '|': case ',': case ';': case '@': case '(': case ')': case '\'':
        return true;
    default:
        return false;
    }
}

std::optional<Candidate> try_form(std::string_view s) {
    if (s.find('=') == std::string_view::npos || has_space(s)) return std::nullopt;
    Candidate c{Decoding::www_form, {}};
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t amp = s.find('&', pos);
        if (amp == std::string_view::npos) amp = s.size();
        std::string_view pair = s.substr(pos, amp - pos);
        pos = amp + 1;
        if (pair.empty()) continue;
        std::size_t eq = pair.find('=');
        if (eq == std::string_view::npos || eq == 0) return std::nullopt;
        std::string_view key = pair.substr(0, eq);
        std::string_view value = pair.substr(eq + 1);
        if (!std::all_of(key.begin(), key.end(), [](unsigned char ch) { return is_form_key_char(ch); }))
            return std::nullopt;
        // Base64 padding ("abc==") is not a key/value pair.
        if (!value.empty() && value.find_first_not_of('=') == std::string_view::npos) return std::nullopt;
        c.parts.push_back({codec::percent_decode(key, true), codec::percent_decode(value, true)});
    }
    if (c.parts.empty()) return std::nullopt;
    // A lone "k=" carries no structure and is the shape of padded base64.
    if (c.parts.size() == 1 && c.parts[0].raw.empty()) return std::nullopt;
    return c;
}

std::optional<Candidate> try_url(std::string_view s) {
    if (has_space(s)) return std::nullopt;
    auto url = parse_url(s);
    if (!url || (url->scheme != "http" && url->scheme != "https")) return std::nullopt;
    Candidate c{Decoding::nested_url, {}};
    c.parts.push_back({"scheme", url->scheme});
    if (!url->userinfo.empty()) c.parts.push_back({"userinfo", url->userinfo});
    c.parts.push_back({"host", url->host});
    if (url->port) c.parts.push_back({"port", std::to_string(*url->port)});
    if (!url->path.empty()) c.parts.push_back({"path", url->path});
    if (url->query && !url->query->empty()) c.parts.push_back({"query", *url->query, true});
    if (url->fragment && !url->fragment->empty()) c.parts.push_back({"fragment", *url->fragment, true});
    return c;
}

std::optional<Candidate> classify(std::string_view s, int remaining);

std::optional<Candidate> try_percent(std::string_view s, int remaining) {
    if (!codec::has_percent_escape(s)) return std::nullopt;
    std::string decoded = codec::percent_decode(s);
    if (decoded == s) return std::nullopt;
    if (!classify(decoded, remaining - 1)) return std::nullopt;
    return Candidate{Decoding::percent, {{"decoded", std::move(decoded)}}};
}

std::optional<Candidate> try_base64(std::string_view s) {
    if (s.size() < kMinBase64Length) return std::nullopt;
    bool url_chars = s.find_first_of("-_") != std::string_view::npos;
    bool std_chars = s.find_first_of("+/") != std::string_view::npos;
    if (url_chars && std_chars) return std::nullopt;
    auto alphabet = url_chars ? codec::Base64Alphabet::url : codec::Base64Alphabet::standard;
    auto decoded = codec::base64_decode(s, alphabet);
    if (!decoded || decoded->empty()) return std::nullopt;
    bool useful = codec::is_printable_utf8(*decoded);
    if (!useful) {
        json doc = json::parse(*decoded, nullptr, false);
        useful = !doc.is_discarded() && (doc.is_object() || doc.is_array());
    }
    if (!useful) return std::nullopt;
    return Candidate{url_chars ? Decoding::base64url : Decoding::base64, {{"decoded", std::move(*decoded)}}};
}

// First applicable decoding in fixed order. remaining is the number of child
// levels the depth budget still allows.
std::optional<Candidate> classify(std::string_view s, int remaining) {
    if (remaining < 1 || s.empty()) return std::nullopt;
    if (auto c = try_jwt(s)) return c;
    if (auto c = try_json(s)) return c;
    if (auto c = try_form(s)) return c;
    if (auto c = try_url(s)) return c;
    if (auto c = try_percent(s, remaining)) return c;
    if (auto c = try_base64(s)) return c;
    return std::nullopt;
}

class Builder {
public:
    explicit Builder(const Limits& limits) : limits_(limits) {}

    Node build(std::string raw, int depth, bool url_component, bool opaque) {
        ++used_;
        Node node;
        node.raw = std::move(raw);
        node.depth = depth;
        if (opaque) return node;
        auto candidate = classify(node.raw, limits_.max_depth - depth);
        if (!candidate) return node;

        std::unordered_set<std::string> taken;
        for (auto& part : candidate->parts) {
            if (used_ >= limits_.max_nodes) break;
            std::string segment = part.key;
            for (int n = 2; !taken.insert(segment).second; ++n) segment = part.key + "#" + std::to_string(n);
            Node child = build(std::move(part.raw), depth + 1, part.url_component, part.opaque);
            node.children.push_back({std::move(segment), std::move(part.key), std::move(child)});
        }
        if (!node.children.empty()) {
            node.decoding = candidate->decoding;
            if (url_component && node.decoding == Decoding::www_form) node.decoding = Decoding::query_string;
        }
        return node;
    }

private:
    Limits limits_;
    std::size_t used_ = 0;
};

void search_rec(const Node& node, Path& path, std::string_view key, std::vector<Match>& out) {
    for (const auto& c : node.children) {
        path.push_back(c.segment);
        if (c.key == key) out.push_back({path, &c.node});
        search_rec(c.node, path, key, out);
        path.pop_back();
    }
}

const Node* find_first_rec(const Node& node, std::string_view key) {
    for (const auto& c : node.children) {
        if (c.key == key) return &c.node;
        if (const Node* hit = find_first_rec(c.node, key)) return hit;
    }
    return nullptr;
}

void urls_rec(const Node& node, Path& path, std::vector<std::pair<Path, std::string>>& out) {
    for (const auto& c : node.children) {
        path.push_back(c.segment);
        if (is_http_url(c.node.raw)) out.emplace_back(path, c.node.raw);
        urls_rec(c.node, path, out);
        path.pop_back();
    }
}

void leaves_rec(const Node& node, Path& path, std::vector<std::pair<Path, std::string>>& out) {
    if (node.is_leaf()) {
        out.emplace_back(path, node.raw);
        return;
    }
    for (const auto& c : node.children) {
        path.push_back(c.segment);
        leaves_rec(c.node, path, out);
        path.pop_back();
    }
}

nlohmann::ordered_json to_json_rec(const Node& node) {
    nlohmann::ordered_json children = nlohmann::ordered_json::object();
    for (const auto& c : node.children) children[c.segment] = to_json_rec(c.node);
    return {{"raw", node.raw}, {"decoding", std::string(to_string(node.decoding))}, {"children", children}};
}

} // namespace

std::string_view to_string(Decoding d) {
    switch (d) {
    case Decoding::leaf: return "leaf";
    case Decoding::percent: return "percent";
    case Decoding::www_form: return "www-form";
    case Decoding::query_string: return "query-string";
    case Decoding::json: return "json";
    case Decoding::jwt: return "jwt";
    case Decoding::base64: return "base64";
    case Decoding::base64url: return "base64url";
    case Decoding::nested_url: return "nested-url";
    }
    return "leaf";
}

const Node* Node::child(std::string_view segment) const {
    for (const auto& c : children) {
        if (c.segment == segment) return &c.node;
    }
    return nullptr;
}

std::string path_to_string(const Path& path) {
    std::string out;
    for (const auto& seg : path) {
        out += '/';
        for (char ch : seg) {
            if (ch == '~')
                out += "~0";
            else if (ch == '/')
                out += "~1";
            else
                out += ch;
        }
    }
    return out;
}

Node decode(std::string_view value, const Limits& limits) {
    Limits effective = limits;
    effective.max_depth = std::max(effective.max_depth, 0);
    effective.max_nodes = std::max<std::size_t>(effective.max_nodes, 1);
    return Builder(effective).build(std::string(value), 0, false, false);
}

std::vector<Match> search(const Node& tree, std::string_view key) {
    std::vector<Match> out;
    Path path;
    search_rec(tree, path, key, out);
    return out;
}

const Node* find_first(const Node& tree, std::string_view key) { return find_first_rec(tree, key); }

std::vector<std::pair<Path, std::string>> find_nested_urls(const Node& tree) {
    std::vector<std::pair<Path, std::string>> out;
    Path path;
    urls_rec(tree, path, out);
    return out;
}

std::vector<std::pair<Path, std::string>> leaves(const Node& tree) {
    std::vector<std::pair<Path, std::string>> out;
    Path path;
    leaves_rec(tree, path, out);
    return out;
}

std::size_t node_count(const Node& tree) {
    std::size_t n = 1;
    for (const auto& c : tree.children) n += node_count(c.node);
    return n;
}

int tree_depth(const Node& tree) {
    int d = tree.depth;
    for (const auto& c : tree.children) d = std::max(d, tree_depth(c.node));
    return d;
}

std::string to_json(const Node& tree, int indent) {
    return to_json_rec(tree).dump(indent, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

namespace encode {

std::string percent(std::string_view value) { return codec::percent_encode(value); }

std::string form(const std::vector<codec::Pair>& pairs) { return codec::form_encode(pairs); }

std::string json_object(const std::vector<codec::Pair>& members) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (const auto& [k, v] : members) obj[k] = v;
    return obj.dump();
}

std::string json_array(const std::vector<std::string>& items) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : items) arr.push_back(v);
    return arr.dump();
}

std::string base64(std::string_view value) { return codec::base64_encode(value); }

std::string base64url(std::string_view value) { return codec::base64url_encode(value); }

std::string jwt(std::string_view header_json, std::string_view payload, std::string_view signature) {
    return codec::base64url_encode(header_json) + "." + codec::base64url_encode(payload) + "." +
           std::string(signature);
}

} // namespace encode

} // namespace ssoaudit::spar
