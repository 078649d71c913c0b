#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssoaudit/landscape.hpp"
#include "ssoaudit/privacy.hpp"
#include "ssoaudit/security.hpp"

namespace ssoaudit {

inline constexpr std::string_view kToolName = "sso-auditor";
inline constexpr std::string_view kToolVersion = "0.3.0";
inline constexpr int kReportSchemaVersion = 1;

struct ConfigSnapshot {
    double entropy_threshold_bits = 96.0;
    bool treat_pkce_as_csrf_protection = true;
    int max_spar_depth = 8;
    std::size_t max_spar_nodes = 10000;
    std::string idp_registry = "builtin";
};

ConfigSnapshot snapshot(const RuleConfig& cfg, std::string idp_registry = "builtin");

struct UnitError {
    std::string unit;  // directory of the unit
    std::string message;
};

struct Report {
    std::string tool_version = std::string(kToolVersion);
    int schema_version = kReportSchemaVersion;
    ConfigSnapshot config;
    std::vector<SecurityResult> units;
    std::optional<std::vector<PrivacyFinding>> privacy;
    std::optional<LandscapeTable> landscape;
    std::optional<Timestamp> generated_at;
    std::vector<UnitError> errors;
};

// Units by (domain, idp), findings by rule, privacy findings by identity.
void sort_report(Report& report);

bool has_vulnerability(const Report& report);

// Canonical form: sorted keys, two-space indent, trailing newline.
std::string report_to_json(const Report& report);
// Throws MalformedInput.
Report report_from_json(std::string_view text);

// "json" or "markdown"; anything else throws UnknownFormat.
std::string render_report(const Report& report, std::string_view format);

// Seven-column security summary per IdP with a totals row.
struct SummaryRow {
    std::string idp;
    int obsolete_flows = 0;
    int protocol_mixup = 0;
    int flow_mixup = 0;
    int open_redirect = 0;
    int csrf_weak = 0;
    int csrf_missing = 0;
    int secret_leakage = 0;

    bool operator==(const SummaryRow&) const = default;
};

struct SecuritySummary {
    std::vector<SummaryRow> rows;
    SummaryRow totals;
};

SecuritySummary summarize_security(const Report& report);

} // namespace ssoaudit
