#include "ssoaudit/sso.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <sstream>

namespace ssoaudit {

namespace {

std::vector<std::string> split_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

bool has_token(const std::optional<std::string>& list, std::string_view token) {
    if (!list) return false;
    auto toks = split_tokens(*list);
    return std::find(toks.begin(), toks.end(), token) != toks.end();
}

// Key present as a direct child of node.
bool has_direct(const spar::Node* node, std::string_view key) {
    if (!node) return false;
    return std::any_of(node->children.begin(), node->children.end(),
                       [&](const spar::Child& c) { return c.key == key; });
}

bool carries_tokens(const spar::Node& tree) {
    return find_shallowest(tree, "code") || find_shallowest(tree, "access_token") ||
           find_shallowest(tree, "id_token");
}

struct TokenSpot {
    const spar::Node* tree;
    Channel channel;
};

// Tokens in the query or fragment of a decoded URL.
std::optional<TokenSpot> tokens_in_url(const spar::Node& url_tree) {
    if (const auto* q = url_tree.child("query"); q && carries_tokens(*q)) return TokenSpot{q, Channel::http_query};
    if (const auto* f = url_tree.child("fragment"); f && carries_tokens(*f))
        return TokenSpot{f, Channel::http_fragment};
    return std::nullopt;
}

SsoMessage make_response(const SsoMessage& req, MessageSource source, Channel channel, std::string url,
                         Timestamp at, const spar::Node& tree, const spar::Limits& limits) {
    SsoMessage m;
    m.kind = MessageKind::login_response;
    m.source = source;
    m.channel = channel;
    m.idp = req.idp;
    m.url = std::move(url);
    m.at = at;
    m.params = extract_params({&tree}, limits);
    return m;
}

std::string host_path_of(std::string_view url) {
    if (auto u = parse_url(url)) return u->host + (u->path.empty() ? "/" : u->path);
    return std::string(url);
}

} // namespace

std::string to_string(const MessageSource& source) {
    return (source.kind == MessageSource::Kind::entry ? "entry:" : "ibc:") + std::to_string(source.index);
}

std::string_view to_string(MessageKind k) {
    switch (k) {
    case MessageKind::login_request: return "login-request";
    case MessageKind::login_response: return "login-response";
    case MessageKind::token_request: return "token-request";
    case MessageKind::token_response: return "token-response";
    }
    return "login-request";
}

std::string_view to_string(Channel c) {
    switch (c) {
    case Channel::http_query: return "http-query";
    case Channel::http_fragment: return "http-fragment";
    case Channel::http_body: return "http-body";
    case Channel::post_message: return "post-message";
    }
    return "http-query";
}

std::string_view to_string(Protocol p) { return p == Protocol::oidc ? "oidc" : "oauth2"; }

std::string_view to_string(Flow f) {
    switch (f) {
    case Flow::code: return "code";
    case Flow::implicit: return "implicit";
    case Flow::hybrid: return "hybrid";
    case Flow::unknown: return "unknown";
    }
    return "unknown";
}

const std::vector<std::pair<std::string_view, std::optional<std::string> SsoParams::*>>& sso_param_fields() {
    static const std::vector<std::pair<std::string_view, std::optional<std::string> SsoParams::*>> fields = {
        {"client_id", &SsoParams::client_id},
        {"redirect_uri", &SsoParams::redirect_uri},
        {"response_type", &SsoParams::response_type},
        {"response_mode", &SsoParams::response_mode},
        {"scope", &SsoParams::scope},
        {"state", &SsoParams::state},
        {"nonce", &SsoParams::nonce},
        {"code_challenge", &SsoParams::code_challenge},
        {"code_challenge_method", &SsoParams::code_challenge_method},
        {"code", &SsoParams::code},
        {"access_token", &SsoParams::access_token},
        {"token_type", &SsoParams::token_type},
        {"id_token", &SsoParams::id_token},
        {"client_secret", &SsoParams::client_secret},
    };
    return fields;
}

DecodedTrace::DecodedTrace(const Trace& trace, const spar::Limits& limits) : trace_(&trace), limits_(limits) {
    urls_.reserve(trace.size());
    bodies_.reserve(trace.size());
    locations_.reserve(trace.size());
    for (const auto& e : trace.entries()) {
        urls_.push_back(spar::decode(e.request.url, limits));
        if (e.request.body && !e.request.body->text.empty())
            bodies_.emplace_back(spar::decode(e.request.body->text, limits));
        else
            bodies_.emplace_back();
        if (e.response.redirect_target)
            locations_.emplace_back(spar::decode(*e.response.redirect_target, limits));
        else
            locations_.emplace_back();
    }
    for (const auto& ev : trace.ibc_events()) ibc_.push_back(spar::decode(ev.payload, limits));
}

const spar::Node* DecodedTrace::body_tree(std::size_t entry) const {
    const auto& b = bodies_.at(entry);
    return b ? &*b : nullptr;
}

const spar::Node* DecodedTrace::location_tree(std::size_t entry) const {
    const auto& l = locations_.at(entry);
    return l ? &*l : nullptr;
}

Timestamp DecodedTrace::time_of(const MessageSource& source) const {
    if (source.kind == MessageSource::Kind::entry) return trace_->entry(source.index).started_at;
    return trace_->ibc_events().at(source.index).at;
}

const spar::Node* find_shallowest(const spar::Node& tree, std::string_view key) {
    std::deque<const spar::Node*> queue{&tree};
    while (!queue.empty()) {
        const spar::Node* n = queue.front();
        queue.pop_front();
        for (const auto& c : n->children) {
            if (c.key == key) return &c.node;
        }
        for (const auto& c : n->children) queue.push_back(&c.node);
    }
    return nullptr;
}

std::optional<std::string> id_token_claim(std::string_view id_token, std::string_view claim,
                                          const spar::Limits& limits) {
    auto tree = spar::decode(id_token, limits);
    if (tree.decoding != spar::Decoding::jwt) return std::nullopt;
    const spar::Node* payload = tree.child("payload");
    if (!payload) return std::nullopt;
    const spar::Node* value = payload->child(claim);
    if (!value) return std::nullopt;
    return value->raw;
}

SsoParams extract_params(const std::vector<const spar::Node*>& trees, const spar::Limits& limits) {
    SsoParams params;
    for (const auto& [name, member] : sso_param_fields()) {
        for (const spar::Node* tree : trees) {
            if (!tree) continue;
            if (const spar::Node* hit = find_shallowest(*tree, name)) {
                params.*member = hit->raw;
                break;
            }
        }
    }
    if (params.id_token) params.at_hash = id_token_claim(*params.id_token, "at_hash", limits);
    return params;
}

std::vector<SsoMessage> detect_login_requests(const DecodedTrace& dt, const IdpRegistry& registry) {
    const Trace& trace = dt.trace();
    std::vector<SsoMessage> out;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const HttpEntry& e = trace.entry(i);
        const spar::Node& url_tree = dt.url_tree(i);
        const spar::Node* body = dt.body_tree(i);
        SsoParams params = extract_params({&url_tree, body}, dt.limits());
        if (!params.client_id || !params.redirect_uri) continue;

        const spar::Node* query = url_tree.child("query");
        std::string idp_name;
        if (const IdpEntry* idp = registry.match_authorization(e.request.parsed_url)) {
            idp_name = idp->name;
        } else {
            auto direct = [&](std::string_view key) { return has_direct(query, key) || has_direct(body, key); };
            if (!direct("client_id") || !direct("redirect_uri") || !direct("response_type")) continue;
            idp_name = "unknown";
        }

        SsoMessage m;
        m.kind = MessageKind::login_request;
        m.source = MessageSource::entry(i);
        m.channel = (!has_direct(query, "client_id") && has_direct(body, "client_id")) ? Channel::http_body
                                                                                          : Channel::http_query;
        m.idp = std::move(idp_name);
        m.url = e.request.parsed_url.without_query();
        m.at = e.started_at;
        m.params = std::move(params);
        out.push_back(std::move(m));
    }

    const auto& events = trace.ibc_events();
    for (std::size_t k = 0; k < events.size(); ++k) {
        const spar::Node& tree = dt.ibc_tree(k);
        SsoParams params = extract_params({&tree}, dt.limits());
        if (!params.client_id || !params.redirect_uri || !params.response_type) continue;
        SsoMessage m;
        m.kind = MessageKind::login_request;
        m.source = MessageSource::ibc(k);
        m.channel = events[k].kind == IbcKind::post_message ? Channel::post_message : Channel::http_fragment;
        m.idp = "unknown";
        if (auto target = parse_url(events[k].target_origin)) {
            if (const IdpEntry* idp = registry.owner_of_host(target->host)) m.idp = idp->name;
        }
        m.url = events[k].target_origin;
        m.at = events[k].at;
        m.params = std::move(params);
        out.push_back(std::move(m));
    }
    std::stable_sort(out.begin(), out.end(), [](const SsoMessage& a, const SsoMessage& b) { return a.at < b.at; });
    return out;
}

std::vector<SsoMessage> detect_login_requests(const Trace& trace, const IdpRegistry& registry) {
    return detect_login_requests(DecodedTrace(trace), registry);
}

std::optional<SsoMessage> match_login_response(const DecodedTrace& dt, const SsoMessage& req,
                                               const IdpRegistry& registry) {
    const Trace& trace = dt.trace();
    std::optional<Url> prefix;
    // Only web redirect URIs can be prefix-matched; "postmessage" and
    // "storagerelay://..." style values are handled through the IdP origin.
    if (req.params.redirect_uri && is_http_url(*req.params.redirect_uri)) prefix = parse_url(*req.params.redirect_uri);
    const Timestamp start = req.at;

    std::optional<SsoMessage> from_entries;
    if (prefix) {
        // The request entry itself may answer with a redirect carrying the response.
        std::size_t first = 0;
        if (req.source.kind == MessageSource::Kind::entry) {
            first = req.source.index;
        } else {
            while (first < trace.size() && trace.entry(first).started_at < start) ++first;
        }
        for (std::size_t j = first; j < trace.size() && !from_entries; ++j) {
            const HttpEntry& e = trace.entry(j);
            const bool is_request = req.source.kind == MessageSource::Kind::entry && j == req.source.index;
            if (!is_request && url_has_prefix(e.request.parsed_url, *prefix)) {
                if (auto spot = tokens_in_url(dt.url_tree(j))) {
                    from_entries = make_response(req, MessageSource::entry(j), spot->channel, e.request.url,
                                                 e.started_at, *spot->tree, dt.limits());
                    break;
                }
                if (const spar::Node* body = dt.body_tree(j); body && carries_tokens(*body)) {
                    from_entries = make_response(req, MessageSource::entry(j), Channel::http_body, e.request.url,
                                                 e.started_at, *body, dt.limits());
                    break;
                }
            }
            if (e.response.redirect_target) {
                auto target = parse_url(*e.response.redirect_target);
                if (target && url_has_prefix(*target, *prefix)) {
                    if (auto spot = tokens_in_url(*dt.location_tree(j))) {
                        from_entries = make_response(req, MessageSource::entry(j), spot->channel,
                                                     *e.response.redirect_target, e.started_at, *spot->tree,
                                                     dt.limits());
                    }
                }
            }
        }
    }

    std::optional<SsoMessage> from_ibc;
    const auto& events = trace.ibc_events();
    const IdpEntry* idp = registry.find(req.idp);
    for (std::size_t k = 0; k < events.size(); ++k) {
        const IbcEvent& ev = events[k];
        if (ev.at < start) continue;
        if (req.source.kind == MessageSource::Kind::ibc && k <= req.source.index) continue;
        const spar::Node& tree = dt.ibc_tree(k);
        if (!carries_tokens(tree)) continue;
        bool matches = false;
        if (prefix) {
            matches = ev.target_origin == prefix->origin() || ev.target_origin == "*";
            if (!matches && ev.kind == IbcKind::fragment_change) {
                auto u = parse_url(ev.payload);
                matches = u && url_has_prefix(*u, *prefix);
            }
        } else if (idp) {
            // redirect_uri is not a URL (e.g. "postmessage"): trust the IdP as sender.
            auto src = parse_url(ev.source_origin);
            matches = src && registry.owner_of_host(src->host) == idp;
        }
        if (!matches) continue;
        const spar::Node* payload_tree = &tree;
        if (ev.kind == IbcKind::fragment_change && tree.decoding == spar::Decoding::nested_url) {
            if (auto spot = tokens_in_url(tree)) payload_tree = spot->tree;
        }
        from_ibc = make_response(req, MessageSource::ibc(k),
                                 ev.kind == IbcKind::post_message ? Channel::post_message : Channel::http_fragment,
                                 ev.target_origin, ev.at, *payload_tree, dt.limits());
        break;
    }

    if (from_entries && from_ibc) return from_ibc->at < from_entries->at ? from_ibc : from_entries;
    return from_entries ? from_entries : from_ibc;
}

std::optional<SsoMessage> match_login_response(const Trace& trace, const SsoMessage& request,
                                               const IdpRegistry& registry) {
    return match_login_response(DecodedTrace(trace), request, registry);
}

std::vector<TokenExchange> detect_token_exchanges(const DecodedTrace& dt, const IdpRegistry& registry) {
    const Trace& trace = dt.trace();
    std::vector<TokenExchange> out;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const HttpEntry& e = trace.entry(i);
        if (e.request.method != "POST") continue;
        const IdpEntry* idp = registry.match_token(e.request.parsed_url);
        if (!idp) continue;
        TokenExchange x;
        x.request.kind = MessageKind::token_request;
        x.request.source = MessageSource::entry(i);
        x.request.channel = Channel::http_body;
        x.request.idp = idp->name;
        x.request.url = e.request.parsed_url.without_query();
        x.request.at = e.started_at;
        x.request.params = extract_params({dt.body_tree(i), &dt.url_tree(i)}, dt.limits());
        if (!e.response.body.text.empty()) {
            auto tree = spar::decode(e.response.body.text, dt.limits());
            SsoParams params = extract_params({&tree}, dt.limits());
            if (params.has_tokens()) {
                SsoMessage resp = x.request;
                resp.kind = MessageKind::token_response;
                resp.params = std::move(params);
                x.response = std::move(resp);
            }
        }
        out.push_back(std::move(x));
    }
    return out;
}

Protocol classify_protocol(const SsoMessage& req, const std::optional<SsoMessage>& resp) {
    if (has_token(req.params.scope, "openid")) return Protocol::oidc;
    if (has_token(req.params.response_type, "id_token")) return Protocol::oidc;
    if (resp && resp->params.id_token) return Protocol::oidc;
    return Protocol::oauth2;
}

Flow classify_requested_flow(const std::optional<std::string>& response_type) {
    if (!response_type) return Flow::unknown;
    bool code = false, token = false, id_token = false;
    auto toks = split_tokens(*response_type);
    if (toks.empty()) return Flow::unknown;
    for (const auto& t : toks) {
        if (t == "code")
            code = true;
        else if (t == "token")
            token = true;
        else if (t == "id_token")
            id_token = true;
        else
            return Flow::unknown;
    }
    if (code) return (token || id_token) ? Flow::hybrid : Flow::code;
    return Flow::implicit;
}

Flow classify_returned_flow(const SsoMessage& resp) {
    bool code = resp.params.code.has_value();
    bool tokens = resp.params.access_token || resp.params.id_token;
    if (code) return tokens ? Flow::hybrid : Flow::code;
    return tokens ? Flow::implicit : Flow::unknown;
}

std::string pairing_key(const SsoMessage& m) {
    std::string target = (m.kind == MessageKind::login_request && m.params.redirect_uri) ? *m.params.redirect_uri : m.url;
    return std::string(to_string(m.kind)) + "|" + m.idp + "|" + host_path_of(target);
}

std::vector<std::pair<SsoMessage, std::optional<SsoMessage>>> pair_runs(const std::vector<SsoMessage>& run1,
                                                                         const std::vector<SsoMessage>& run2) {
    std::map<std::string, std::deque<std::size_t>> pending;
    for (std::size_t i = 0; i < run2.size(); ++i) pending[pairing_key(run2[i])].push_back(i);
    std::vector<std::pair<SsoMessage, std::optional<SsoMessage>>> out;
    out.reserve(run1.size());
    for (const auto& m : run1) {
        auto& queue = pending[pairing_key(m)];
        if (queue.empty()) {
            out.emplace_back(m, std::nullopt);
        } else {
            out.emplace_back(m, run2[queue.front()]);
            queue.pop_front();
        }
    }
    return out;
}

} // namespace ssoaudit
