#include "ssoaudit/privacy.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "ssoaudit/sso.hpp"

namespace ssoaudit {

namespace {

void require_visit(const Trace& trace) {
    if (trace.metadata().profile_kind == ProfileKind::login_run)
        throw ProfileMismatch("privacy analysis needs a consent-given or no-consent visit trace");
}

PrivacyFinding base_finding(const Trace& trace, LeakKind kind, std::string idp, Evidence evidence) {
    PrivacyFinding f;
    f.kind = kind;
    f.idp = std::move(idp);
    f.domain = trace.metadata().domain;
    f.profile_kind = trace.metadata().profile_kind;
    f.evidence = std::move(evidence);
    f.annotation = trace.metadata().annotation;
    return f;
}

std::string_view token_key(const SsoParams& p) {
    if (p.id_token) return "id_token";
    if (p.access_token) return "access_token";
    return "code";
}

} // namespace

std::string_view to_string(LeakKind k) { return k == LeakKind::lal ? "LAL" : "TEL"; }

std::vector<PrivacyFinding> detect_lal(const Trace& trace, const IdpRegistry& registry) {
    require_visit(trace);
    DecodedTrace dt(trace);
    std::vector<PrivacyFinding> out;
    std::set<std::string> seen;
    for (const auto& req : detect_login_requests(dt, registry)) {
        if (!seen.insert(req.idp).second) continue;
        out.push_back(base_finding(trace, LeakKind::lal, req.idp, locate(dt, req.source, "client_id")));
    }
    return out;
}

std::vector<PrivacyFinding> detect_tel(const Trace& trace, const IdpRegistry& registry) {
    require_visit(trace);
    DecodedTrace dt(trace);
    std::vector<PrivacyFinding> out;
    std::set<MessageSource> claimed;
    for (const auto& req : detect_login_requests(dt, registry)) {
        auto resp = match_login_response(dt, req, registry);
        if (!resp || !claimed.insert(resp->source).second) continue;
        out.push_back(base_finding(trace, LeakKind::tel, req.idp, locate(dt, resp->source, token_key(resp->params))));
    }

    // Tokens coming out of an IdP with no request to pair them with.
    auto orphan = [&](const MessageSource& src, const IdpEntry* idp, const spar::Node& tree) {
        if (!idp || claimed.count(src)) return;
        SsoParams p = extract_params({&tree});
        if (!p.has_tokens()) return;
        claimed.insert(src);
        PrivacyFinding f = base_finding(trace, LeakKind::tel, idp->name, locate(dt, src, token_key(p)));
        f.response_without_request = true;
        out.push_back(std::move(f));
    };
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const spar::Node* loc = dt.location_tree(i);
        if (!loc) continue;
        const IdpEntry* idp = registry.owner_of_host(trace.entry(i).request.parsed_url.host);
        for (std::string_view part : {"query", "fragment"}) {
            if (const spar::Node* n = loc->child(part)) {
                orphan(MessageSource::entry(i), idp, *n);
            }
        }
    }
    const auto& events = trace.ibc_events();
    for (std::size_t k = 0; k < events.size(); ++k) {
        auto src = parse_url(events[k].source_origin);
        orphan(MessageSource::ibc(k), src ? registry.owner_of_host(src->host) : nullptr, dt.ibc_tree(k));
    }
    std::sort(out.begin(), out.end(),
              [](const PrivacyFinding& a, const PrivacyFinding& b) { return a.evidence.source < b.evidence.source; });
    return out;
}

PrivacyTable aggregate_privacy(const std::vector<PrivacyFinding>& findings) {
    std::set<std::tuple<std::string, std::string, ProfileKind, LeakKind>> seen;
    std::map<std::string, PrivacyCounts> rows;
    PrivacyTable table;
    for (const auto& f : findings) {
        if (f.profile_kind == ProfileKind::login_run) continue;
        if (!seen.emplace(f.domain, f.idp, f.profile_kind, f.kind).second) continue;
        PrivacyCounts& row = rows[f.idp];
        bool consent = f.profile_kind == ProfileKind::consent_given_visit;
        int PrivacyCounts::*cell = consent ? (f.kind == LeakKind::lal ? &PrivacyCounts::consent_lal : &PrivacyCounts::consent_tel)
                                           : (f.kind == LeakKind::lal ? &PrivacyCounts::noconsent_lal
                                                                      : &PrivacyCounts::noconsent_tel);
        ++(row.*cell);
        ++(table.totals.*cell);
    }
    for (auto& [idp, counts] : rows) table.rows.push_back({idp, counts});
    return table;
}

} // namespace ssoaudit
