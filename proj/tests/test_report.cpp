#include <doctest.h>

#include <map>

#include <json.hpp>

#include "fixtures.hpp"
#include "ssoaudit/error.hpp"
#include "ssoaudit/report.hpp"

using namespace ssoaudit;
using namespace ssoaudit::testing;

namespace {

Report pack_report() {
    Report r;
    for (const auto& b : fixture_pack()) {
        Trace r1 = b.run1.build();
        Trace r2 = b.run2.build();
        r.units.push_back(run_all(r1, &r2, RuleConfig{}));
    }
    std::vector<PrivacyFinding> privacy;
    for (const auto& f : privacy_pack()) {
        Trace t = f.trace.build();
        for (auto& x : detect_lal(t)) privacy.push_back(x);
        for (auto& x : detect_tel(t)) privacy.push_back(x);
    }
    r.privacy = privacy;
    r.generated_at = parse_timestamp("2024-05-01T10:05:00Z");
    r.errors.push_back({"broken.test/google", "missing metadata field: profile_kind"});
    sort_report(r);
    return r;
}

} // namespace

TEST_CASE("empty report renders a zero table") {
    Report r;
    CHECK_FALSE(has_vulnerability(r));
    auto s = summarize_security(r);
    CHECK(s.rows.empty());
    CHECK(s.totals == SummaryRow{"Total"});
    std::string md = render_report(r, "markdown");
    CHECK(md.find("| IdP | Obsolete Flows | Protocol Mix-Up | Flow Mix-Up | Open Redirect | CSRF Weak | CSRF Missing | "
                  "Secret Leakage |") != std::string::npos);
    CHECK(md.find("| Total | 0 | 0 | 0 | 0 | 0 | 0 | 0 |") != std::string::npos);
    auto doc = nlohmann::json::parse(render_report(r, "json"));
    CHECK(doc["schema_version"] == kReportSchemaVersion);
    CHECK(doc["security"]["units"].empty());
    CHECK(doc["privacy"].is_null());
}

TEST_CASE("unknown formats") {
    CHECK_THROWS_AS(render_report(Report{}, "xml"), UnknownFormat);
    CHECK_THROWS_AS(render_report(Report{}, ""), UnknownFormat);
    CHECK(render_report(Report{}, "md") == render_report(Report{}, "markdown"));
}

TEST_CASE("summary totals equal finding counts") {
    Report r = pack_report();
    std::map<std::string, int> per_rule;
    for (const auto& u : r.units)
        for (const auto& f : u.findings) per_rule[f.rule_id]++;
    int secrets = per_rule["secret.client-secret-fc"] + per_rule["secret.referer-leak"] + per_rule["secret.token-in-url"];
    auto s = summarize_security(r);
    CHECK(s.totals.obsolete_flows == per_rule["flow.obsolete"]);
    CHECK(s.totals.protocol_mixup == per_rule["protocol.mixup"]);
    CHECK(s.totals.flow_mixup == per_rule["flow.mixup"]);
    CHECK(s.totals.open_redirect == per_rule["redirect.nested-url"]);
    CHECK(s.totals.csrf_weak == per_rule["csrf.weak"]);
    CHECK(s.totals.csrf_missing == per_rule["csrf.missing"]);
    CHECK(s.totals.secret_leakage == secrets);
    REQUIRE(s.rows.size() == 1);
    CHECK(s.rows[0].idp == "Google");
    CHECK(s.rows[0].csrf_missing == s.totals.csrf_missing);
    CHECK(has_vulnerability(r));

    std::string md = render_report(r, "markdown");
    CHECK(md.find("## Privacy") != std::string::npos);
    CHECK(md.find("## Errors") != std::string::npos);
    CHECK(md.find("csrf.missing") != std::string::npos);
}

TEST_CASE("canonical JSON round trip") {
    Report r = pack_report();
    std::string once = report_to_json(r);
    CHECK(once == report_to_json(pack_report()));
    CHECK(once.back() == '\n');
    Report back = report_from_json(once);
    CHECK(report_to_json(back) == once);
    CHECK(back.units.size() == r.units.size());
    CHECK(back.privacy->size() == r.privacy->size());

    // keys come out sorted at every level
    auto doc = nlohmann::ordered_json::parse(once);
    std::vector<std::string> keys;
    for (auto it = doc.begin(); it != doc.end(); ++it) keys.push_back(it.key());
    CHECK(std::is_sorted(keys.begin(), keys.end()));

    CHECK_THROWS_AS(report_from_json("{}"), MalformedInput);
    CHECK_THROWS_AS(report_from_json("nope"), MalformedInput);
}

TEST_CASE("vulnerability detection follows categories") {
    Report r;
    SecurityResult u;
    u.domain = "a.test";
    u.idp = "Google";
    u.findings.push_back({"flow.obsolete", Category::potential_issue, "Google", "a.test", {}, "x"});
    r.units.push_back(u);
    CHECK_FALSE(has_vulnerability(r));
    r.units[0].findings.push_back({"csrf.missing", Category::vulnerability, "Google", "a.test", {}, "y"});
    CHECK(has_vulnerability(r));
}

TEST_CASE("landscape section") {
    Report r;
    LandscapeTable t;
    t.rows.push_back({"Google", {3, 0, 1, 2, 2, 0, 1, 0}});
    t.totals = t.rows[0].counts;
    r.landscape = t;
    CHECK(render_report(r, "markdown").find("## Landscape") != std::string::npos);
    auto back = report_from_json(report_to_json(r));
    REQUIRE(back.landscape);
    CHECK(back.landscape->totals == t.totals);
}
