#include "ssoaudit/security.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "ssoaudit/domain.hpp"

namespace ssoaudit {

namespace {

using ordered_json = nlohmann::ordered_json;

bool has_token(const std::optional<std::string>& list, std::string_view token) {
    if (!list) return false;
    std::istringstream in{*list};
    for (std::string tok; in >> tok;)
        if (tok == token) return true;
    return false;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

std::string fmt_bits(double bits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", bits);
    return buf;
}

Finding make_finding(std::string_view rule_id, const std::string& idp, std::vector<Evidence> evidence,
                     std::string message) {
    const RuleInfo* info = find_rule(rule_id);
    if (!info) throw std::logic_error("rule missing from catalog: " + std::string(rule_id));
    Finding f;
    f.rule_id = std::string(rule_id);
    f.category = info->category;
    f.idp = idp;
    f.evidence = std::move(evidence);
    f.message = std::move(message);
    return f;
}

struct NamedTree {
    std::string_view name;
    const spar::Node* tree;
};

std::vector<NamedTree> trees_of(const DecodedTrace& dt, const MessageSource& source) {
    if (source.kind == MessageSource::Kind::ibc) return {{"payload", &dt.ibc_tree(source.index)}};
    std::vector<NamedTree> out{{"url", &dt.url_tree(source.index)}};
    if (const auto* b = dt.body_tree(source.index)) out.push_back({"body", b});
    if (const auto* l = dt.location_tree(source.index)) out.push_back({"location", l});
    return out;
}

Evidence whole(const DecodedTrace& dt, const MessageSource& source) {
    if (source.kind == MessageSource::Kind::ibc)
        return {source, "/payload", make_excerpt(dt.trace().ibc_events().at(source.index).payload)};
    return {source, "/url", make_excerpt(dt.trace().entry(source.index).request.url)};
}

std::string host_path(std::string_view url) {
    if (auto u = parse_url(url)) return u->host + u->path;
    return std::string(url);
}

std::string unit_idp(const Trace& trace, const std::vector<LoginPair>& logins) {
    if (trace.metadata().idp_label && !trace.metadata().idp_label->empty()) return *trace.metadata().idp_label;
    if (!logins.empty()) return logins.front().req1.idp;
    return "unknown";
}

void append(std::vector<Finding>& out, std::vector<Finding> more) {
    for (auto& f : more) out.push_back(std::move(f));
}

} // namespace

std::string_view to_string(Category c) {
    switch (c) {
    case Category::potential_issue: return "potential-issue";
    case Category::vulnerability: return "vulnerability";
    case Category::diagnostic: return "diagnostic";
    }
    return "diagnostic";
}

std::optional<Category> category_from_string(std::string_view text) {
    for (auto c : {Category::potential_issue, Category::vulnerability, Category::diagnostic})
        if (to_string(c) == text) return c;
    return std::nullopt;
}

std::string_view to_string(EntropyBasis b) {
    switch (b) {
    case EntropyBasis::static_across_runs: return "static-across-runs";
    case EntropyBasis::charset_length: return "charset-length";
    case EntropyBasis::absent: return "absent";
    }
    return "absent";
}

std::string make_excerpt(std::string_view text) {
    std::size_t i = 0, points = 0;
    while (i < text.size() && points < 200) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
        i = std::min(text.size(), i + len);
        ++points;
    }
    return std::string(text.substr(0, i));
}

bool finding_less(const Finding& a, const Finding& b) {
    auto first = [](const Finding& f) {
        return f.evidence.empty() ? MessageSource{} : f.evidence.front().source;
    };
    auto first_path = [](const Finding& f) { return f.evidence.empty() ? std::string() : f.evidence.front().path; };
    return std::make_tuple(std::cref(a.rule_id), first(a), first_path(a), std::cref(a.idp), std::cref(a.message)) <
           std::make_tuple(std::cref(b.rule_id), first(b), first_path(b), std::cref(b.idp), std::cref(b.message));
}

const std::vector<RuleInfo>& rule_catalog() {
    static const std::vector<RuleInfo> rules = {
        {"csrf.missing", Category::vulnerability, "Login request without state, nonce or PKCE",
         "RFC 6749; OAuth 2.0 Security Best Current Practice"},
        {"csrf.weak", Category::vulnerability, "CSRF protection parameter with low entropy",
         "RFC 6749; OAuth 2.0 Security Best Current Practice"},
        {"flow.obsolete", Category::potential_issue,
         "Implicit flow, or hybrid flow returning an access_token in the front channel",
         "OAuth 2.0 Security Best Current Practice"},
        {"protocol.mixup", Category::potential_issue, "id_token returned although the openid scope was not requested",
         "OpenID Connect Core 1.0"},
        {"flow.mixup", Category::potential_issue, "Returned credentials differ from the requested response_type",
         "OAuth 2.0 Multiple Response Type Encoding Practices"},
        {"redirect.nested-url", Category::potential_issue, "redirect_uri carries a nested URL",
         "OAuth 2.0 Security Best Current Practice"},
        {"secret.client-secret-fc", Category::vulnerability, "client_secret visible in the front channel",
         "RFC 6749"},
        {"secret.referer-leak", Category::vulnerability, "Credential sent to a third party in a Referer header",
         "OAuth 2.0 Security Best Current Practice"},
        {"secret.token-in-url", Category::potential_issue, "Token in the query of a navigated URL",
         "OAuth 2.0 Security Best Current Practice"},
        {"tls.plain-redirect-uri", Category::vulnerability, "redirect_uri uses plain http", "RFC 6749; RFC 8252"},
        {"tls.plain-request", Category::potential_issue, "Request sent over plain http",
         "OAuth 2.0 Security Best Current Practice"},
        {"redirect.307-authz-response", Category::potential_issue, "Authorization response forwarded with status 307",
         "OAuth 2.0 Security Best Current Practice"},
        {"inject.code-unprotected", Category::potential_issue, "Authorization code without PKCE or nonce",
         "RFC 7636; OAuth 2.0 Security Best Current Practice"},
        {"inject.at-hash-missing", Category::potential_issue,
         "id_token returned with an access_token but without at_hash", "OpenID Connect Core 1.0"},
        {"idtoken.symmetric-alg", Category::vulnerability, "Front-channel id_token signed with an HMAC algorithm",
         "OpenID Connect Core 1.0"},
        {"idtoken.alg-none", Category::vulnerability, "Front-channel id_token with alg none",
         "OpenID Connect Core 1.0; RFC 7519"},
        {"idtoken.malformed", Category::potential_issue, "id_token is not a compact JWT", "RFC 7519"},
        {"rule.error", Category::diagnostic, "A rule failed on this input", ""},
    };
    return rules;
}

const RuleInfo* find_rule(std::string_view id) {
    for (const auto& r : rule_catalog())
        if (r.id == id) return &r;
    return nullptr;
}

std::string rule_catalog_json() {
    ordered_json rules = ordered_json::array();
    for (const auto& r : rule_catalog()) {
        rules.push_back({{"rule_id", r.id},
                         {"category", to_string(r.category)},
                         {"title", r.title},
                         {"reference", r.reference}});
    }
    return ordered_json{{"rules", rules}}.dump(2) + "\n";
}

void RuleConfig::validate() const {
    if (!(entropy_threshold_bits > 0)) throw std::invalid_argument("entropy threshold must be positive");
    if (limits.max_depth < 1) throw std::invalid_argument("max_spar_depth must be at least 1");
    if (limits.max_nodes < 1) throw std::invalid_argument("max_spar_nodes must be at least 1");
}

int alphabet_class_size(std::string_view s) {
    bool digits = true, hex = true, alnum = true, b64url = true;
    for (char ch : s) {
        auto c = static_cast<unsigned char>(ch);
        bool is_digit = c >= '0' && c <= '9';
        bool is_alpha = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        bool is_hex = is_digit || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
        digits = digits && is_digit;
        hex = hex && is_hex;
        alnum = alnum && (is_digit || is_alpha);
        b64url = b64url && (is_digit || is_alpha || c == '-' || c == '_');
    }
    if (digits) return 10;
    if (hex) return 16;
    if (alnum) return 62;
    if (b64url) return 64;
    return 94;
}

EntropyEstimate estimate_entropy(const std::optional<std::string>& value,
                                 const std::optional<std::string>& paired_value, const spar::Limits& limits) {
    if (!value) return {0.0, EntropyBasis::absent};
    if (paired_value && *paired_value == *value) return {0.0, EntropyBasis::static_across_runs};
    double best = 0.0;
    for (const auto& [path, leaf] : spar::leaves(spar::decode(*value, limits))) {
        double bits = static_cast<double>(leaf.size()) * std::log2(static_cast<double>(alphabet_class_size(leaf)));
        best = std::max(best, bits);
    }
    return {best, EntropyBasis::charset_length};
}

std::string jwt_alg(std::string_view token, const spar::Limits& limits) {
    auto tree = spar::decode(token, limits);
    if (tree.decoding != spar::Decoding::jwt) throw MalformedJwt("not a three-part compact token");
    const spar::Node* header = tree.child("header");
    const spar::Node* alg = header ? header->child("alg") : nullptr;
    if (!alg) throw MalformedJwt("header has no alg");
    return alg->raw;
}

Evidence locate(const DecodedTrace& dt, const MessageSource& source, std::string_view key) {
    std::optional<Evidence> best;
    std::size_t best_len = 0;
    for (const auto& [name, tree] : trees_of(dt, source)) {
        for (const auto& m : spar::search(*tree, key)) {
            if (!best || m.path.size() < best_len) {
                best = Evidence{source, "/" + std::string(name) + spar::path_to_string(m.path), make_excerpt(m.node->raw)};
                best_len = m.path.size();
            }
        }
    }
    return best ? *best : whole(dt, source);
}

std::vector<Finding> check_csrf(const DecodedTrace& dt, const LoginPair& pair, const RuleConfig& cfg) {
    const SsoParams& p = pair.req1.params;
    if (p.code_challenge && cfg.treat_pkce_as_csrf_protection) return {};
    if (!p.state && !p.nonce && !p.code_challenge) {
        return {make_finding("csrf.missing", pair.req1.idp, {whole(dt, pair.req1.source)},
                             "login request carries neither state, nonce nor code_challenge")};
    }
    const SsoParams* p2 = pair.req2 ? &pair.req2->params : nullptr;
    std::string best_name;
    EntropyEstimate best{-1.0, EntropyBasis::absent};
    auto consider = [&](std::string_view name, std::optional<std::string> SsoParams::*member) {
        if (!(p.*member)) return;
        auto e = estimate_entropy(p.*member, p2 ? p2->*member : std::nullopt, cfg.limits);
        if (e.bits > best.bits) {
            best = e;
            best_name = name;
        }
    };
    consider("state", &SsoParams::state);
    consider("nonce", &SsoParams::nonce);
    consider("code_challenge", &SsoParams::code_challenge);
    if (best.bits > cfg.entropy_threshold_bits) return {};
    std::string msg = best_name + " carries about " + fmt_bits(best.bits) + " bits (" +
                      std::string(to_string(best.basis)) + "), threshold " + fmt_bits(cfg.entropy_threshold_bits);
    return {make_finding("csrf.weak", pair.req1.idp, {locate(dt, pair.req1.source, best_name)}, std::move(msg))};
}

std::vector<Finding> check_obsolete_flow(const DecodedTrace& dt, const SsoMessage& req,
                                         const std::optional<SsoMessage>& resp) {
    if (!resp) return {};
    Flow returned = classify_returned_flow(*resp);
    if (returned == Flow::implicit) {
        std::string key = resp->params.access_token ? "access_token" : "id_token";
        return {make_finding("flow.obsolete", req.idp, {locate(dt, resp->source, key)},
                             "implicit flow: " + key + " delivered in the front channel")};
    }
    if (returned == Flow::hybrid && resp->params.access_token) {
        return {make_finding("flow.obsolete", req.idp, {locate(dt, resp->source, "access_token")},
                             "hybrid flow delivers access_token in the front channel")};
    }
    return {};
}

std::vector<Finding> check_mixups(const DecodedTrace& dt, const SsoMessage& req, const std::optional<SsoMessage>& resp,
                                  const std::vector<TokenExchange>& visible_exchanges) {
    std::vector<Finding> out;
    const bool openid = has_token(req.params.scope, "openid");
    if (resp && resp->params.id_token && !openid) {
        out.push_back(make_finding("protocol.mixup", req.idp, {locate(dt, resp->source, "id_token")},
                                   "id_token returned but scope lacks openid"));
    }

    std::vector<Evidence> flow_evidence;
    std::string flow_msg;
    Flow requested = classify_requested_flow(req.params.response_type);
    if (resp && requested != Flow::unknown) {
        Flow returned = classify_returned_flow(*resp);
        const std::pair<std::string_view, bool> extras[] = {
            {"code", resp->params.code && !has_token(req.params.response_type, "code")},
            {"access_token", resp->params.access_token && !has_token(req.params.response_type, "token")},
            {"id_token", resp->params.id_token && !has_token(req.params.response_type, "id_token")},
        };
        std::string extra_key;
        for (const auto& [key, extra] : extras) {
            if (extra) {
                extra_key = key;
                break;
            }
        }
        if (returned != requested || !extra_key.empty()) {
            flow_evidence.push_back(extra_key.empty() ? whole(dt, resp->source) : locate(dt, resp->source, extra_key));
            flow_msg = "requested " + std::string(to_string(requested)) + " flow, returned " +
                       std::string(to_string(returned));
            if (!extra_key.empty()) flow_msg += " with unrequested " + extra_key;
        }
    }
    for (const auto& x : visible_exchanges) {
        if (!x.response || x.request.at < req.at || !iequals(x.request.idp, req.idp)) continue;
        const SsoParams& tp = x.response->params;
        if (tp.code || (tp.id_token && !openid)) {
            std::string key = tp.code ? "code" : "id_token";
            const HttpEntry& e = dt.trace().entry(x.response->source.index);
            flow_evidence.push_back({x.response->source, "/response", make_excerpt(e.response.body.text)});
            if (flow_msg.empty()) flow_msg = "token exchange additionally returns " + key;
        }
    }
    if (!flow_evidence.empty()) out.push_back(make_finding("flow.mixup", req.idp, std::move(flow_evidence), flow_msg));
    return out;
}

std::vector<Finding> check_open_redirect(const DecodedTrace& dt, const SsoMessage& req, const spar::Limits& limits) {
    if (!req.params.redirect_uri) return {};
    auto nested = spar::find_nested_urls(spar::decode(*req.params.redirect_uri, limits));
    if (nested.empty()) return {};
    std::string base = locate(dt, req.source, "redirect_uri").path;
    std::vector<Evidence> evidence;
    for (const auto& [path, url] : nested) evidence.push_back({req.source, base + spar::path_to_string(path), make_excerpt(url)});
    std::string msg = std::to_string(evidence.size()) + " nested URL(s) inside redirect_uri";
    return {make_finding("redirect.nested-url", req.idp, std::move(evidence), std::move(msg))};
}

std::vector<Finding> check_secret_leakage(const DecodedTrace& dt, const std::vector<LoginPair>& logins,
                                          const IdpRegistry& registry) {
    const Trace& trace = dt.trace();
    const std::string idp = unit_idp(trace, logins);
    std::vector<Finding> out;

    // client_secret anywhere in the front channel
    std::vector<Evidence> secret;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        for (const auto& [name, tree] : trees_of(dt, MessageSource::entry(i))) {
            if (name == "body") continue;
            for (const auto& m : spar::search(*tree, "client_secret"))
                secret.push_back({MessageSource::entry(i), "/" + std::string(name) + spar::path_to_string(m.path),
                                  make_excerpt(m.node->raw)});
        }
    }
    for (std::size_t k = 0; k < trace.ibc_events().size(); ++k) {
        for (const auto& m : spar::search(dt.ibc_tree(k), "client_secret"))
            secret.push_back({MessageSource::ibc(k), "/payload" + spar::path_to_string(m.path), make_excerpt(m.node->raw)});
    }
    if (!secret.empty()) {
        out.push_back(make_finding("secret.client-secret-fc", idp, std::move(secret),
                                   "client_secret appears in the front channel"));
    }

    // credentials in Referer headers towards third parties
    std::vector<Evidence> referer;
    std::set<std::size_t> referer_entries;
    for (const auto& login : logins) {
        if (!login.resp1) continue;
        const SsoParams& rp = login.resp1->params;
        std::vector<std::string> values;
        for (const auto* v : {&rp.code, &rp.access_token, &rp.id_token})
            if (*v && (*v)->size() >= 6) values.push_back(**v);
        if (values.empty()) continue;

        std::set<std::string> first_parties{registrable_domain(trace.metadata().domain)};
        if (login.req1.params.redirect_uri) {
            if (auto u = parse_url(*login.req1.params.redirect_uri)) first_parties.insert(registrable_domain(u->host));
        }
        if (login.req1.source.kind == MessageSource::Kind::entry)
            first_parties.insert(registrable_domain(trace.entry(login.req1.source.index).request.parsed_url.host));
        if (const IdpEntry* entry = registry.find(login.req1.idp)) {
            for (auto& d : registry.domains_of(*entry)) first_parties.insert(d);
        }

        for (std::size_t i = 0; i < trace.size(); ++i) {
            const HttpEntry& e = trace.entry(i);
            const Header* h = find_header(e.request.headers, "Referer");
            if (!h) continue;
            const std::string decoded = codec::percent_decode(h->value, true);
            bool leaks = std::any_of(values.begin(), values.end(), [&](const std::string& v) {
                return h->value.find(v) != std::string::npos || decoded.find(v) != std::string::npos;
            });
            if (!leaks) continue;
            if (first_parties.count(registrable_domain(e.request.parsed_url.host))) continue;
            if (referer_entries.insert(i).second)
                referer.push_back({MessageSource::entry(i), "/header/Referer", make_excerpt(h->value)});
        }
    }
    if (!referer.empty()) {
        std::sort(referer.begin(), referer.end(),
                  [](const Evidence& a, const Evidence& b) { return a.source < b.source; });
        out.push_back(make_finding("secret.referer-leak", idp, std::move(referer),
                                   "login credential sent to a third party in the Referer header"));
    }

    // tokens in navigated URLs (browser history)
    std::set<std::string> token_values;
    for (const auto& login : logins) {
        if (!login.resp1) continue;
        for (const auto* v : {&login.resp1->params.access_token, &login.resp1->params.id_token})
            if (*v && (*v)->size() >= 6) token_values.insert(**v);
    }
    std::vector<Evidence> history;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (!trace.entry(i).is_navigation()) continue;
        const spar::Node* query = dt.url_tree(i).child("query");
        if (!query) continue;
        std::optional<Evidence> ev;
        for (std::string_view key : {"access_token", "id_token"}) {
            auto hits = spar::search(*query, key);
            if (!hits.empty()) {
                ev = Evidence{MessageSource::entry(i), "/url/query" + spar::path_to_string(hits.front().path),
                              make_excerpt(hits.front().node->raw)};
                break;
            }
        }
        if (!ev) {
            for (const auto& [path, leaf] : spar::leaves(*query)) {
                if (token_values.count(leaf)) {
                    ev = Evidence{MessageSource::entry(i), "/url/query" + spar::path_to_string(path), make_excerpt(leaf)};
                    break;
                }
            }
        }
        if (ev) history.push_back(std::move(*ev));
    }
    if (!history.empty()) {
        out.push_back(make_finding("secret.token-in-url", idp, std::move(history),
                                   "token in the query of a navigated URL ends up in browser history"));
    }
    return out;
}

std::vector<Finding> check_transport(const DecodedTrace& dt, const std::vector<LoginPair>& logins) {
    const Trace& trace = dt.trace();
    const std::string idp = unit_idp(trace, logins);
    std::vector<Finding> out;
    for (const auto& login : logins) {
        if (!login.req1.params.redirect_uri) continue;
        auto u = parse_url(*login.req1.params.redirect_uri);
        if (!u || u->scheme != "http" || is_loopback_host(u->host)) continue;
        out.push_back(make_finding("tls.plain-redirect-uri", login.req1.idp,
                                   {locate(dt, login.req1.source, "redirect_uri")},
                                   "redirect_uri " + u->origin() + " is not protected by TLS"));
    }
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const HttpEntry& e = trace.entry(i);
        if (e.request.parsed_url.scheme == "https") continue;
        out.push_back(make_finding("tls.plain-request", idp, {{MessageSource::entry(i), "/url", make_excerpt(e.request.url)}},
                                   e.request.method + " over " + e.request.parsed_url.scheme));
    }
    for (const auto& login : logins) {
        if (!login.resp1 || login.resp1->source.kind != MessageSource::Kind::entry) continue;
        std::size_t j = login.resp1->source.index;
        std::vector<Evidence> evidence;
        const std::string target = strip_fragment(login.resp1->url);
        for (std::size_t k = 0; k <= j; ++k) {
            const HttpEntry& e = trace.entry(k);
            if (e.response.status != 307) continue;
            bool forwards = k == j || (e.response.redirect_target && strip_fragment(*e.response.redirect_target) == target);
            if (forwards)
                evidence.push_back({MessageSource::entry(k), "/response/status",
                                    make_excerpt("307 " + e.response.redirect_target.value_or(""))});
        }
        if (!evidence.empty()) {
            out.push_back(make_finding("redirect.307-authz-response", login.req1.idp, std::move(evidence),
                                       "authorization response forwarded with 307, which replays a POST body"));
        }
    }
    return out;
}

std::vector<Finding> check_injection_protection(const DecodedTrace& dt, const SsoMessage& req,
                                                const std::optional<SsoMessage>& resp) {
    std::vector<Finding> out;
    if (!resp) return out;
    if (resp->params.code && !req.params.code_challenge && !req.params.nonce) {
        out.push_back(make_finding("inject.code-unprotected", req.idp, {locate(dt, resp->source, "code")},
                                   "code issued to a request without code_challenge or nonce"));
    }
    if (resp->params.id_token && resp->params.access_token && !resp->params.at_hash) {
        out.push_back(make_finding("inject.at-hash-missing", req.idp, {locate(dt, resp->source, "id_token")},
                                   "id_token returned next to an access_token lacks at_hash"));
    }
    return out;
}

std::vector<Finding> check_id_token_alg(const DecodedTrace& dt, const std::optional<SsoMessage>& resp,
                                        const spar::Limits& limits) {
    if (!resp || !resp->params.id_token) return {};
    Evidence ev = locate(dt, resp->source, "id_token");
    std::string alg;
    try {
        alg = jwt_alg(*resp->params.id_token, limits);
    } catch (const MalformedJwt& e) {
        return {make_finding("idtoken.malformed", resp->idp, {ev}, e.what())};
    }
    if (iequals(alg, "none")) return {make_finding("idtoken.alg-none", resp->idp, {ev}, "id_token alg is none")};
    if (alg.size() >= 2 && iequals(alg.substr(0, 2), "HS"))
        return {make_finding("idtoken.symmetric-alg", resp->idp, {ev}, "id_token signed with " + alg)};
    return {};
}

std::vector<std::pair<SsoMessage, std::optional<SsoMessage>>> collect_logins(const DecodedTrace& dt,
                                                                             const IdpRegistry& registry) {
    std::vector<std::pair<SsoMessage, std::optional<SsoMessage>>> out;
    std::map<std::string, std::size_t> seen;
    for (auto& req : detect_login_requests(dt, registry)) {
        auto resp = match_login_response(dt, req, registry);
        std::string key = req.idp + "|" + host_path(req.params.redirect_uri.value_or(""));
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(key, out.size());
            out.emplace_back(std::move(req), std::move(resp));
        } else if (!out[it->second].second && resp) {
            out[it->second] = {std::move(req), std::move(resp)};
        }
    }
    return out;
}

SecurityResult run_all(const Trace& run1, const Trace* run2, const RuleConfig& cfg, const IdpRegistry& registry) {
    cfg.validate();
    if (run1.metadata().profile_kind != ProfileKind::login_run ||
        (run2 && run2->metadata().profile_kind != ProfileKind::login_run))
        throw ProfileMismatch("security analysis needs login-run traces");

    DecodedTrace d1(run1, cfg.limits);
    auto logins1 = collect_logins(d1, registry);
    std::vector<std::pair<SsoMessage, std::optional<SsoMessage>>> logins2;
    if (run2) logins2 = collect_logins(DecodedTrace(*run2, cfg.limits), registry);

    std::vector<LoginPair> pairs;
    std::vector<bool> used(logins2.size(), false);
    for (auto& [req, resp] : logins1) {
        LoginPair p{req, resp, std::nullopt, std::nullopt};
        const std::string key = pairing_key(req);
        for (std::size_t j = 0; j < logins2.size(); ++j) {
            if (!used[j] && pairing_key(logins2[j].first) == key) {
                used[j] = true;
                p.req2 = logins2[j].first;
                p.resp2 = logins2[j].second;
                break;
            }
        }
        pairs.push_back(std::move(p));
    }

    SecurityResult result;
    result.domain = run1.metadata().domain;
    result.idp = unit_idp(run1, pairs);
    auto exchanges = detect_token_exchanges(d1, registry);

    auto guarded = [&](std::string_view rule, const MessageSource& where, auto&& fn) {
        try {
            append(result.findings, fn());
        } catch (const std::exception& e) {
            Evidence ev{where, "", make_excerpt(e.what())};
            result.findings.push_back(
                make_finding("rule.error", result.idp, {ev}, std::string(rule) + ": " + e.what()));
        }
    };

    for (const auto& p : pairs) {
        const MessageSource& src = p.req1.source;
        guarded("csrf", src, [&] { return check_csrf(d1, p, cfg); });
        guarded("obsolete-flow", src, [&] { return check_obsolete_flow(d1, p.req1, p.resp1); });
        guarded("mixups", src, [&] { return check_mixups(d1, p.req1, p.resp1, exchanges); });
        guarded("open-redirect", src, [&] { return check_open_redirect(d1, p.req1, cfg.limits); });
        guarded("injection", src, [&] { return check_injection_protection(d1, p.req1, p.resp1); });
        guarded("id-token-alg", src, [&] { return check_id_token_alg(d1, p.resp1, cfg.limits); });

        LoginSummary s;
        s.idp = p.req1.idp;
        s.client_id = p.req1.params.client_id.value_or("");
        s.redirect_uri = p.req1.params.redirect_uri.value_or("");
        s.response_type = p.req1.params.response_type.value_or("");
        s.protocol = classify_protocol(p.req1, p.resp1);
        s.requested_flow = classify_requested_flow(p.req1.params.response_type);
        if (p.resp1) {
            s.returned_flow = classify_returned_flow(*p.resp1);
            s.response_channel = p.resp1->channel;
        }
        s.countermeasures.state = p.req1.params.state.has_value();
        s.countermeasures.nonce = p.req1.params.nonce.has_value();
        s.countermeasures.pkce = p.req1.params.code_challenge.has_value();
        s.countermeasures.at_hash = p.resp1 && p.resp1->params.at_hash.has_value();
        EntropyEstimate best{0.0, EntropyBasis::absent};
        for (auto member : {&SsoParams::state, &SsoParams::nonce}) {
            auto e = estimate_entropy(p.req1.params.*member, p.req2 ? p.req2->params.*member : std::nullopt, cfg.limits);
            if (best.basis == EntropyBasis::absent || e.bits > best.bits) {
                if (e.basis != EntropyBasis::absent) best = e;
            }
        }
        s.csrf_entropy = best;
        result.logins.push_back(std::move(s));
    }
    const MessageSource trace_src = run1.size() ? MessageSource::entry(0) : MessageSource::ibc(0);
    guarded("secret-leakage", trace_src, [&] { return check_secret_leakage(d1, pairs, registry); });
    guarded("transport", trace_src, [&] { return check_transport(d1, pairs); });

    for (auto& f : result.findings) {
        f.domain = result.domain;
        if (run1.metadata().idp_label && !run1.metadata().idp_label->empty()) f.idp = *run1.metadata().idp_label;
    }
    std::sort(result.findings.begin(), result.findings.end(), finding_less);
    return result;
}

} // namespace ssoaudit
