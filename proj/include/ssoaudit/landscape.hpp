#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ssoaudit/sso.hpp"
#include "ssoaudit/trace.hpp"

namespace ssoaudit {

// ---- search queries and result pooling

// Five search-engine queries for a registrable domain, fixed order.
// Throws InvalidDomain.
std::vector<std::string> build_search_queries(std::string_view domain);

struct RankedList {
    std::string engine;
    std::vector<std::string> urls;  // best first
};

struct PooledResult {
    std::string url;
    int best_rank = 0;  // 1-based
    std::string engine;  // engine that ranked it best (earliest engine on ties)
};

// Lists are given in engine priority order. Throws std::invalid_argument
// when top_k < 1.
std::vector<PooledResult> pool_results(const std::vector<RankedList>& lists, int top_k, std::string_view domain);

// ---- keyword-based SSO button detection

struct IdpKeywords {
    std::string idp;
    std::vector<std::string> names;    // "google"
    std::vector<std::string> phrases;  // "sign in with google"
};

struct KeywordConfig {
    std::vector<IdpKeywords> idps;

    static KeywordConfig defaults();
    // {"idps": [{"idp", "names", "phrases"}]}; phrases and names are
    // normalized on load.
    static KeywordConfig from_json(std::string_view text);
    std::string to_json() const;
};

enum class MatchKind { phrase, idp_name };

struct SsoCandidate {
    std::string element_kind;  // link, button, clickable
    std::string text;
    std::string matched_keyword;
    MatchKind match = MatchKind::phrase;
    std::string idp;
    std::size_t position = 0;
};

std::vector<SsoCandidate> extract_sso_candidates(std::string_view html,
                                                 const KeywordConfig& config = KeywordConfig::defaults());

// ---- monitoring history

enum class DetectionMethod { keyword, image, manual };

std::string_view to_string(DetectionMethod m);
std::optional<DetectionMethod> detection_method_from_string(std::string_view text);

struct IdpObservation {
    std::string idp;
    DetectionMethod method = DetectionMethod::keyword;
    std::string login_page;

    bool operator==(const IdpObservation&) const = default;
};

struct ScanRecord {
    std::string domain;
    Timestamp scanned_at;
    std::vector<std::string> login_pages;
    std::vector<IdpObservation> idps;  // unique per (idp, login_page)

    bool operator==(const ScanRecord&) const = default;
};

// One JSON object per line. Duplicate (idp, login_page) entries are dropped
// on read. Throws MalformedInput naming the offending line.
std::vector<ScanRecord> read_scan_records(std::string_view jsonl);
std::string write_scan_records(const std::vector<ScanRecord>& records);

struct LandscapeDiff {
    std::vector<std::pair<std::string, std::string>> added;    // (domain, idp), sorted
    std::vector<std::pair<std::string, std::string>> removed;  // (domain, idp), sorted
    std::set<std::string> websites_added;
    std::set<std::string> websites_removed;

    bool operator==(const LandscapeDiff&) const = default;
};

// Several records for one domain: the latest scan wins.
LandscapeDiff diff_scans(const std::vector<ScanRecord>& prev, const std::vector<ScanRecord>& next);

std::string diff_to_json(const LandscapeDiff& diff);
// Added/Removed rows, one column per IdP plus Websites.
std::string diff_to_markdown(const LandscapeDiff& diff);

// ---- landscape table

struct LoginClassification {
    std::string domain;
    std::string idp;
    std::string login_page;  // empty: applies to every page of (domain, idp)
    Protocol protocol = Protocol::oauth2;
    Flow flow = Flow::unknown;
};

struct LandscapeCounts {
    int logins = 0;
    int broken = 0;  // observed but never classified
    int oauth2 = 0;
    int oidc = 0;
    int code = 0;
    int hybrid = 0;
    int implicit = 0;
    int unknown = 0;

    bool operator==(const LandscapeCounts&) const = default;
};

struct LandscapeRow {
    std::string idp;
    LandscapeCounts counts;
};

struct LandscapeTable {
    std::vector<LandscapeRow> rows;  // sorted by idp
    LandscapeCounts totals;
};

// Logins are distinct (domain, idp, page) observations; a classification
// without an observation still counts as a login.
LandscapeTable aggregate_landscape(const std::vector<ScanRecord>& scans,
                                   const std::vector<LoginClassification>& classifications);

std::string landscape_to_markdown(const LandscapeTable& table);

} // namespace ssoaudit
