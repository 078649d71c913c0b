#include "ssoaudit/report.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include <json.hpp>

#include "ssoaudit/error.hpp"

namespace ssoaudit {

namespace {

// std::map-backed, so keys come out sorted
using json = nlohmann::json;

template <typename Enum, std::size_t N>
Enum enum_from(const json& j, const Enum (&all)[N], const char* what) {
    const std::string s = j.get<std::string>();
    for (Enum e : all)
        if (to_string(e) == s) return e;
    throw MalformedInput(std::string("report: unknown ") + what + " '" + s + "'");
}

constexpr Protocol kProtocols[] = {Protocol::oauth2, Protocol::oidc};
constexpr Flow kFlows[] = {Flow::code, Flow::implicit, Flow::hybrid, Flow::unknown};
constexpr Channel kChannels[] = {Channel::http_query, Channel::http_fragment, Channel::http_body,
                                 Channel::post_message};
constexpr EntropyBasis kBases[] = {EntropyBasis::static_across_runs, EntropyBasis::charset_length,
                                   EntropyBasis::absent};
constexpr Category kCategories[] = {Category::potential_issue, Category::vulnerability, Category::diagnostic};
constexpr ProfileKind kProfiles[] = {ProfileKind::login_run, ProfileKind::consent_given_visit,
                                     ProfileKind::no_consent_visit};
constexpr LeakKind kLeaks[] = {LeakKind::lal, LeakKind::tel};

json evidence_json(const Evidence& e) {
    return {{"source", to_string(e.source)}, {"path", e.path}, {"excerpt", e.excerpt}};
}

MessageSource source_from(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos) throw MalformedInput("report: bad evidence source '" + s + "'");
    std::string kind = s.substr(0, colon);
    std::size_t index = 0;
    try {
        index = std::stoul(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw MalformedInput("report: bad evidence source '" + s + "'");
    }
    if (kind == "entry") return MessageSource::entry(index);
    if (kind == "ibc") return MessageSource::ibc(index);
    throw MalformedInput("report: bad evidence source '" + s + "'");
}

Evidence evidence_from(const json& j) {
    return {source_from(j.at("source").get<std::string>()), j.at("path").get<std::string>(),
            j.at("excerpt").get<std::string>()};
}

json finding_json(const Finding& f) {
    json ev = json::array();
    for (const auto& e : f.evidence) ev.push_back(evidence_json(e));
    return {{"rule_id", f.rule_id}, {"category", to_string(f.category)}, {"idp", f.idp},
            {"domain", f.domain},   {"message", f.message},              {"evidence", ev}};
}

Finding finding_from(const json& j) {
    Finding f;
    f.rule_id = j.at("rule_id").get<std::string>();
    f.category = enum_from(j.at("category"), kCategories, "category");
    f.idp = j.at("idp").get<std::string>();
    f.domain = j.at("domain").get<std::string>();
    f.message = j.at("message").get<std::string>();
    for (const auto& e : j.at("evidence")) f.evidence.push_back(evidence_from(e));
    return f;
}

json login_json(const LoginSummary& s) {
    return {{"idp", s.idp},
            {"client_id", s.client_id},
            {"redirect_uri", s.redirect_uri},
            {"response_type", s.response_type},
            {"protocol", to_string(s.protocol)},
            {"requested_flow", to_string(s.requested_flow)},
            {"returned_flow", s.returned_flow ? json(to_string(*s.returned_flow)) : json(nullptr)},
            {"response_channel", s.response_channel ? json(to_string(*s.response_channel)) : json(nullptr)},
            {"countermeasures",
             {{"state", s.countermeasures.state},
              {"nonce", s.countermeasures.nonce},
              {"pkce", s.countermeasures.pkce},
              {"at_hash", s.countermeasures.at_hash}}},
            {"csrf_entropy", {{"bits", s.csrf_entropy.bits}, {"basis", to_string(s.csrf_entropy.basis)}}}};
}

LoginSummary login_from(const json& j) {
    LoginSummary s;
    s.idp = j.at("idp").get<std::string>();
    s.client_id = j.at("client_id").get<std::string>();
    s.redirect_uri = j.at("redirect_uri").get<std::string>();
    s.response_type = j.at("response_type").get<std::string>();
    s.protocol = enum_from(j.at("protocol"), kProtocols, "protocol");
    s.requested_flow = enum_from(j.at("requested_flow"), kFlows, "flow");
    if (!j.at("returned_flow").is_null()) s.returned_flow = enum_from(j.at("returned_flow"), kFlows, "flow");
    if (!j.at("response_channel").is_null())
        s.response_channel = enum_from(j.at("response_channel"), kChannels, "channel");
    const auto& c = j.at("countermeasures");
    s.countermeasures = {c.at("state").get<bool>(), c.at("nonce").get<bool>(), c.at("pkce").get<bool>(),
                         c.at("at_hash").get<bool>()};
    s.csrf_entropy.bits = j.at("csrf_entropy").at("bits").get<double>();
    s.csrf_entropy.basis = enum_from(j.at("csrf_entropy").at("basis"), kBases, "entropy basis");
    return s;
}

json privacy_counts_json(const PrivacyCounts& c) {
    return {{"consent_given", {{"LAL", c.consent_lal}, {"TEL", c.consent_tel}}},
            {"no_consent", {{"LAL", c.noconsent_lal}, {"TEL", c.noconsent_tel}}}};
}

json landscape_counts_json(const LandscapeCounts& c) {
    return {{"sso_logins", c.logins}, {"broken", c.broken}, {"oauth2", c.oauth2}, {"oidc", c.oidc},
            {"code", c.code},         {"hybrid", c.hybrid}, {"implicit", c.implicit}, {"unknown", c.unknown}};
}

LandscapeCounts landscape_counts_from(const json& j) {
    LandscapeCounts c;
    c.logins = j.at("sso_logins").get<int>();
    c.broken = j.at("broken").get<int>();
    c.oauth2 = j.at("oauth2").get<int>();
    c.oidc = j.at("oidc").get<int>();
    c.code = j.at("code").get<int>();
    c.hybrid = j.at("hybrid").get<int>();
    c.implicit = j.at("implicit").get<int>();
    c.unknown = j.at("unknown").get<int>();
    return c;
}

std::string md_row(const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const auto& c : cells) out += " " + c + " |";
    return out + "\n";
}

std::string markdown(const Report& report) {
    std::string out = "# SSO audit report\n\n";
    out += "Tool " + std::string(kToolName) + " " + report.tool_version;
    if (report.generated_at) out += ", generated " + format_timestamp(*report.generated_at);
    out += "\n\n## Security\n\n";

    SecuritySummary sum = summarize_security(report);
    auto row = [](const std::string& name, const SummaryRow& r) {
        return md_row({name, std::to_string(r.obsolete_flows), std::to_string(r.protocol_mixup),
                       std::to_string(r.flow_mixup), std::to_string(r.open_redirect), std::to_string(r.csrf_weak),
                       std::to_string(r.csrf_missing), std::to_string(r.secret_leakage)});
    };
    out += md_row({"IdP", "Obsolete Flows", "Protocol Mix-Up", "Flow Mix-Up", "Open Redirect", "CSRF Weak",
                   "CSRF Missing", "Secret Leakage"});
    out += md_row({"---", "---:", "---:", "---:", "---:", "---:", "---:", "---:"});
    for (const auto& r : sum.rows) out += row(r.idp, r);
    out += row("Total", sum.totals);

    std::vector<const Finding*> others;
    for (const auto& u : report.units)
        for (const auto& f : u.findings) others.push_back(&f);
    if (!others.empty()) {
        out += "\n### Findings\n\n";
        out += md_row({"Domain", "IdP", "Rule", "Category", "Message"});
        out += md_row({"---", "---", "---", "---", "---"});
        for (const Finding* f : others) {
            std::string msg = f->message;
            std::replace(msg.begin(), msg.end(), '|', '/');
            out += md_row({f->domain, f->idp, f->rule_id, std::string(to_string(f->category)), msg});
        }
    }

    if (report.privacy) {
        PrivacyTable t = aggregate_privacy(*report.privacy);
        out += "\n## Privacy\n\n";
        out += md_row({"IdP", "Consent LAL", "Consent TEL", "No-Consent LAL", "No-Consent TEL"});
        out += md_row({"---", "---:", "---:", "---:", "---:"});
        auto prow = [](const std::string& name, const PrivacyCounts& c) {
            return md_row({name, std::to_string(c.consent_lal), std::to_string(c.consent_tel),
                           std::to_string(c.noconsent_lal), std::to_string(c.noconsent_tel)});
        };
        for (const auto& r : t.rows) out += prow(r.idp, r.counts);
        out += prow("Total", t.totals);
    }
    if (report.landscape) out += "\n## Landscape\n\n" + landscape_to_markdown(*report.landscape);
    if (!report.errors.empty()) {
        out += "\n## Errors\n\n";
        for (const auto& e : report.errors) out += "- " + e.unit + ": " + e.message + "\n";
    }
    return out;
}

} // namespace

ConfigSnapshot snapshot(const RuleConfig& cfg, std::string idp_registry) {
    return {cfg.entropy_threshold_bits, cfg.treat_pkce_as_csrf_protection, cfg.limits.max_depth,
            cfg.limits.max_nodes, std::move(idp_registry)};
}

void sort_report(Report& report) {
    for (auto& u : report.units) std::sort(u.findings.begin(), u.findings.end(), finding_less);
    std::stable_sort(report.units.begin(), report.units.end(), [](const SecurityResult& a, const SecurityResult& b) {
        return std::tie(a.domain, a.idp) < std::tie(b.domain, b.idp);
    });
    if (report.privacy) {
        std::stable_sort(report.privacy->begin(), report.privacy->end(),
                         [](const PrivacyFinding& a, const PrivacyFinding& b) {
                             return std::make_tuple(std::cref(a.domain), std::cref(a.idp), a.profile_kind, a.kind,
                                                    a.evidence.source) <
                                    std::make_tuple(std::cref(b.domain), std::cref(b.idp), b.profile_kind, b.kind,
                                                    b.evidence.source);
                         });
    }
    std::stable_sort(report.errors.begin(), report.errors.end(),
                     [](const UnitError& a, const UnitError& b) { return a.unit < b.unit; });
}

bool has_vulnerability(const Report& report) {
    for (const auto& u : report.units)
        for (const auto& f : u.findings)
            if (f.category == Category::vulnerability) return true;
    return false;
}

SecuritySummary summarize_security(const Report& report) {
    std::map<std::string, SummaryRow> rows;
    SecuritySummary sum;
    sum.totals.idp = "Total";
    for (const auto& u : report.units) {
        rows[u.idp].idp = u.idp;
        for (const auto& f : u.findings) {
            int SummaryRow::*cell = nullptr;
            if (f.rule_id == "flow.obsolete")
                cell = &SummaryRow::obsolete_flows;
            else if (f.rule_id == "protocol.mixup")
                cell = &SummaryRow::protocol_mixup;
            else if (f.rule_id == "flow.mixup")
                cell = &SummaryRow::flow_mixup;
            else if (f.rule_id == "redirect.nested-url")
                cell = &SummaryRow::open_redirect;
            else if (f.rule_id == "csrf.weak")
                cell = &SummaryRow::csrf_weak;
            else if (f.rule_id == "csrf.missing")
                cell = &SummaryRow::csrf_missing;
            else if (f.rule_id.rfind("secret.", 0) == 0)
                cell = &SummaryRow::secret_leakage;
            SummaryRow& r = rows[f.idp];
            r.idp = f.idp;
            if (!cell) continue;
            ++(r.*cell);
            ++(sum.totals.*cell);
        }
    }
    for (auto& [idp, r] : rows) sum.rows.push_back(r);
    return sum;
}

std::string report_to_json(const Report& report) {
    json units = json::array();
    int vulns = 0, potentials = 0;
    for (const auto& u : report.units) {
        json logins = json::array(), findings = json::array();
        for (const auto& s : u.logins) logins.push_back(login_json(s));
        for (const auto& f : u.findings) {
            findings.push_back(finding_json(f));
            vulns += f.category == Category::vulnerability;
            potentials += f.category == Category::potential_issue;
        }
        units.push_back({{"domain", u.domain}, {"idp", u.idp}, {"logins", logins}, {"findings", findings}});
    }
    json doc = {
        {"schema_version", report.schema_version},
        {"tool", {{"name", kToolName}, {"version", report.tool_version}}},
        {"generated_at", report.generated_at ? json(format_timestamp(*report.generated_at)) : json(nullptr)},
        {"config",
         {{"entropy_threshold_bits", report.config.entropy_threshold_bits},
          {"treat_pkce_as_csrf_protection", report.config.treat_pkce_as_csrf_protection},
          {"max_spar_depth", report.config.max_spar_depth},
          {"max_spar_nodes", report.config.max_spar_nodes},
          {"idp_registry", report.config.idp_registry}}},
        {"security",
         {{"units", units}, {"summary", {{"vulnerabilities", vulns}, {"potential_issues", potentials}}}}},
    };
    if (report.privacy) {
        json findings = json::array();
        for (const auto& f : *report.privacy) {
            findings.push_back({{"kind", to_string(f.kind)},
                                {"idp", f.idp},
                                {"domain", f.domain},
                                {"profile_kind", to_string(f.profile_kind)},
                                {"evidence", evidence_json(f.evidence)},
                                {"response_without_request", f.response_without_request},
                                {"annotation", f.annotation ? json(*f.annotation) : json(nullptr)}});
        }
        PrivacyTable t = aggregate_privacy(*report.privacy);
        json rows = json::array();
        for (const auto& r : t.rows) rows.push_back({{"idp", r.idp}, {"counts", privacy_counts_json(r.counts)}});
        doc["privacy"] = {{"findings", findings}, {"table", {{"rows", rows}, {"totals", privacy_counts_json(t.totals)}}}};
    } else {
        doc["privacy"] = nullptr;
    }
    if (report.landscape) {
        json rows = json::array();
        for (const auto& r : report.landscape->rows)
            rows.push_back({{"idp", r.idp}, {"counts", landscape_counts_json(r.counts)}});
        doc["landscape"] = {{"rows", rows}, {"totals", landscape_counts_json(report.landscape->totals)}};
    } else {
        doc["landscape"] = nullptr;
    }
    json errors = json::array();
    for (const auto& e : report.errors) errors.push_back({{"unit", e.unit}, {"message", e.message}});
    doc["errors"] = errors;
    return doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

Report report_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw MalformedInput(std::string("report: ") + e.what());
    }
    Report r;
    try {
        r.schema_version = doc.at("schema_version").get<int>();
        if (r.schema_version != kReportSchemaVersion)
            throw MalformedInput("report: unsupported schema_version " + std::to_string(r.schema_version));
        r.tool_version = doc.at("tool").at("version").get<std::string>();
        if (!doc.at("generated_at").is_null()) {
            r.generated_at = parse_timestamp(doc["generated_at"].get<std::string>());
            if (!r.generated_at) throw MalformedInput("report: bad generated_at");
        }
        const auto& c = doc.at("config");
        r.config.entropy_threshold_bits = c.at("entropy_threshold_bits").get<double>();
        r.config.treat_pkce_as_csrf_protection = c.at("treat_pkce_as_csrf_protection").get<bool>();
        r.config.max_spar_depth = c.at("max_spar_depth").get<int>();
        r.config.max_spar_nodes = c.at("max_spar_nodes").get<std::size_t>();
        r.config.idp_registry = c.at("idp_registry").get<std::string>();
        for (const auto& u : doc.at("security").at("units")) {
            SecurityResult s;
            s.domain = u.at("domain").get<std::string>();
            s.idp = u.at("idp").get<std::string>();
            for (const auto& l : u.at("logins")) s.logins.push_back(login_from(l));
            for (const auto& f : u.at("findings")) s.findings.push_back(finding_from(f));
            r.units.push_back(std::move(s));
        }
        if (doc.contains("privacy") && !doc["privacy"].is_null()) {
            std::vector<PrivacyFinding> findings;
            for (const auto& f : doc["privacy"].at("findings")) {
                PrivacyFinding p;
                p.kind = enum_from(f.at("kind"), kLeaks, "leak kind");
                p.idp = f.at("idp").get<std::string>();
                p.domain = f.at("domain").get<std::string>();
                p.profile_kind = enum_from(f.at("profile_kind"), kProfiles, "profile kind");
                p.evidence = evidence_from(f.at("evidence"));
                p.response_without_request = f.at("response_without_request").get<bool>();
                if (!f.at("annotation").is_null()) p.annotation = f["annotation"].get<std::string>();
                findings.push_back(std::move(p));
            }
            r.privacy = std::move(findings);
        }
        if (doc.contains("landscape") && !doc["landscape"].is_null()) {
            LandscapeTable t;
            for (const auto& row : doc["landscape"].at("rows"))
                t.rows.push_back({row.at("idp").get<std::string>(), landscape_counts_from(row.at("counts"))});
            t.totals = landscape_counts_from(doc["landscape"].at("totals"));
            r.landscape = std::move(t);
        }
        for (const auto& e : doc.value("errors", json::array()))
            r.errors.push_back({e.at("unit").get<std::string>(), e.at("message").get<std::string>()});
    } catch (const json::exception& e) {
        throw MalformedInput(std::string("report: ") + e.what());
    }
    return r;
}

std::string render_report(const Report& report, std::string_view format) {
    if (format == "json") return report_to_json(report);
    if (format == "markdown" || format == "md") return markdown(report);
    throw UnknownFormat(std::string(format));
}

} // namespace ssoaudit
