#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ssoaudit/error.hpp"
#include "ssoaudit/idp_registry.hpp"
#include "ssoaudit/spar.hpp"
#include "ssoaudit/sso.hpp"
#include "ssoaudit/trace.hpp"

namespace ssoaudit {

enum class Category { potential_issue, vulnerability, diagnostic };

std::string_view to_string(Category c);
std::optional<Category> category_from_string(std::string_view text);

struct Evidence {
    MessageSource source;
    std::string path;     // "/url/query/state", "/payload/id_token", "/header/Referer"
    std::string excerpt;  // at most 200 characters

    bool operator==(const Evidence&) const = default;
};

// Cuts text to at most 200 code points.
std::string make_excerpt(std::string_view text);

struct Finding {
    std::string rule_id;
    Category category = Category::potential_issue;
    std::string idp;
    std::string domain;
    std::vector<Evidence> evidence;
    std::string message;

    bool operator==(const Finding&) const = default;
};

// Order used in reports: rule id, then first evidence reference.
bool finding_less(const Finding& a, const Finding& b);

struct RuleInfo {
    std::string_view id;
    Category category;
    std::string_view title;
    std::string_view reference;
};

const std::vector<RuleInfo>& rule_catalog();
const RuleInfo* find_rule(std::string_view id);
std::string rule_catalog_json();

struct RuleConfig {
    double entropy_threshold_bits = 96.0;
    bool treat_pkce_as_csrf_protection = true;
    spar::Limits limits;

    // Throws std::invalid_argument on a non-positive threshold or budget.
    void validate() const;
};

enum class EntropyBasis { static_across_runs, charset_length, absent };

std::string_view to_string(EntropyBasis b);

struct EntropyEstimate {
    double bits = 0.0;
    EntropyBasis basis = EntropyBasis::absent;
};

// Size of the smallest class (digits, hex, alnum, base64url, printable) that
// holds every byte of s.
int alphabet_class_size(std::string_view s);

EntropyEstimate estimate_entropy(const std::optional<std::string>& value,
                                 const std::optional<std::string>& paired_value,
                                 const spar::Limits& limits = {});

// A login request of run 1 with its response and the matching request and
// response of run 2, when those were recorded.
struct LoginPair {
    SsoMessage req1;
    std::optional<SsoMessage> resp1;
    std::optional<SsoMessage> req2;
    std::optional<SsoMessage> resp2;
};

class MalformedJwt : public Error {
public:
    explicit MalformedJwt(const std::string& what) : Error("malformed JWT: " + what) {}
};

// alg from the JOSE header. Throws MalformedJwt.
std::string jwt_alg(std::string_view token, const spar::Limits& limits = {});

// Evidence for a parameter: shallowest node with that key in the trees of
// the source. Falls back to the whole tree when the key is not there.
Evidence locate(const DecodedTrace& dt, const MessageSource& source, std::string_view key);

// Individual rules. Findings come back without domain; the rules that look
// at a single login copy the idp from the request.
std::vector<Finding> check_csrf(const DecodedTrace& dt, const LoginPair& pair, const RuleConfig& cfg);
std::vector<Finding> check_obsolete_flow(const DecodedTrace& dt, const SsoMessage& req,
                                         const std::optional<SsoMessage>& resp);
std::vector<Finding> check_mixups(const DecodedTrace& dt, const SsoMessage& req, const std::optional<SsoMessage>& resp,
                                  const std::vector<TokenExchange>& visible_exchanges);
std::vector<Finding> check_open_redirect(const DecodedTrace& dt, const SsoMessage& req, const spar::Limits& limits = {});
std::vector<Finding> check_secret_leakage(const DecodedTrace& dt, const std::vector<LoginPair>& logins,
                                          const IdpRegistry& registry);
std::vector<Finding> check_transport(const DecodedTrace& dt, const std::vector<LoginPair>& logins);
std::vector<Finding> check_injection_protection(const DecodedTrace& dt, const SsoMessage& req,
                                                const std::optional<SsoMessage>& resp);
std::vector<Finding> check_id_token_alg(const DecodedTrace& dt, const std::optional<SsoMessage>& resp,
                                        const spar::Limits& limits = {});

struct Countermeasures {
    bool state = false;
    bool nonce = false;
    bool pkce = false;
    bool at_hash = false;
};

struct LoginSummary {
    std::string idp;
    std::string client_id;
    std::string redirect_uri;
    std::string response_type;
    Protocol protocol = Protocol::oauth2;
    Flow requested_flow = Flow::unknown;
    std::optional<Flow> returned_flow;  // none when no response was recorded
    std::optional<Channel> response_channel;
    Countermeasures countermeasures;
    EntropyEstimate csrf_entropy;
};

struct SecurityResult {
    std::string domain;
    std::string idp;
    std::vector<LoginSummary> logins;
    std::vector<Finding> findings;
};

// Login requests of a run with their responses, one per
// (idp, redirect_uri host+path).
std::vector<std::pair<SsoMessage, std::optional<SsoMessage>>> collect_logins(const DecodedTrace& dt,
                                                                             const IdpRegistry& registry);

// All rules over one (domain, idp) unit. run2 is optional and only feeds
// pairing and entropy; trace-wide rules look at run1. Throws ProfileMismatch
// unless both traces are login runs.
SecurityResult run_all(const Trace& run1, const Trace* run2, const RuleConfig& cfg,
                       const IdpRegistry& registry = IdpRegistry::defaults());

} // namespace ssoaudit
