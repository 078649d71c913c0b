#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssoaudit/idp_registry.hpp"
#include "ssoaudit/security.hpp"
#include "ssoaudit/trace.hpp"

namespace ssoaudit {

// Login attempt leak: a login request the user never started.
// Token exchange leak: tokens issued during such a visit.
enum class LeakKind { lal, tel };

std::string_view to_string(LeakKind k);  // "LAL", "TEL"

struct PrivacyFinding {
    LeakKind kind = LeakKind::lal;
    std::string idp;
    std::string domain;
    ProfileKind profile_kind = ProfileKind::no_consent_visit;
    Evidence evidence;
    // TEL with no earlier login request in the trace; needs a human look.
    bool response_without_request = false;
    std::optional<std::string> annotation;
};

// Both throw ProfileMismatch on login-run traces.
std::vector<PrivacyFinding> detect_lal(const Trace& trace, const IdpRegistry& registry = IdpRegistry::defaults());
std::vector<PrivacyFinding> detect_tel(const Trace& trace, const IdpRegistry& registry = IdpRegistry::defaults());

struct PrivacyCounts {
    int consent_lal = 0;
    int consent_tel = 0;
    int noconsent_lal = 0;
    int noconsent_tel = 0;

    bool operator==(const PrivacyCounts&) const = default;
};

struct PrivacyRow {
    std::string idp;
    PrivacyCounts counts;
};

struct PrivacyTable {
    std::vector<PrivacyRow> rows;  // sorted by idp
    PrivacyCounts totals;
};

// Counts distinct (domain, idp, profile, kind) tuples.
PrivacyTable aggregate_privacy(const std::vector<PrivacyFinding>& findings);

} // namespace ssoaudit
