#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ssoaudit/trace.hpp"

namespace ssoaudit::testing {

struct EntrySpec {
    std::string method = "GET";
    std::string url;
    int status = 200;
    std::optional<std::string> location;
    std::vector<Header> headers;
    std::string resource_type = "document";
    std::optional<std::string> post_body;
    std::string post_mime = "application/x-www-form-urlencoded";
    std::string response_body = "<html></html>";
    std::string response_mime = "text/html";
};

// Writes HAR 1.2 text the way a browser recorder would, so fixtures go
// through the real parser.
class TraceBuilder {
public:
    TraceBuilder(std::string domain, std::string idp, ProfileKind kind, int run_index,
                 std::string page_url = "", std::string start = "2024-05-01T10:00:00.000Z");

    TraceBuilder& add(EntrySpec e);
    TraceBuilder& ibc(IbcKind kind, std::string source, std::string target, std::string payload);
    TraceBuilder& step(int ms) {
        clock_ms_ += ms;
        return *this;
    }

    std::string har_json() const;
    std::string meta_json() const;
    std::optional<std::string> ibc_json() const;
    Trace build() const;
    void write(const std::filesystem::path& dir) const;

    std::size_t size() const { return entries_.size(); }

private:
    struct Timed {
        EntrySpec spec;
        long long at_ms;
    };
    struct TimedEvent {
        IbcKind kind;
        std::string source, target, payload;
        long long at_ms;
    };
    std::string domain_, idp_, page_url_;
    ProfileKind kind_;
    int run_index_;
    Timestamp start_;
    long long clock_ms_ = 0;
    std::vector<Timed> entries_;
    std::vector<TimedEvent> events_;
};

std::string random_hex(std::mt19937& rng, std::size_t n);
std::string random_digits(std::mt19937& rng, std::size_t n);
std::string random_b64url(std::mt19937& rng, std::size_t n);

// Compact JWS with the given alg and a JSON payload.
std::string make_jwt(std::mt19937& rng, const std::string& alg, const std::string& payload_json);

enum class Csrf { none, strong, digits8 };
enum class Delivery { none, query, fragment, form_post };

struct LoginSpec {
    std::string slug;  // site is www.<slug>.test
    std::string response_type = "code";
    std::string scope = "openid email";
    Csrf state = Csrf::strong;
    Csrf nonce = Csrf::none;
    bool pkce = true;
    std::string redirect_uri;  // default https://www.<slug>.test/auth/callback
    std::optional<std::string> response_mode;
    std::vector<std::pair<std::string, std::string>> extra_params;
    Delivery delivery = Delivery::query;
    std::vector<std::string> returned = {"code"};  // code, access_token, id_token
    std::string id_token_alg = "RS256";
    bool at_hash = false;
    bool malformed_id_token = false;
    int idp_status = 302;
    // Runs after the callback with the credentials that were handed out.
    std::function<void(TraceBuilder&, const std::map<std::string, std::string>&)> after;
};

std::string fixture_domain(const LoginSpec& spec);
TraceBuilder build_login(const LoginSpec& spec, int run, std::mt19937& rng);

struct FixtureBundle {
    std::string name;                      // rule id, or "baseline"
    std::optional<std::string> trigger;    // rule the bundle exists for
    TraceBuilder run1;
    TraceBuilder run2;
};

// Secure baseline plus one trigger bundle per rule.
std::vector<FixtureBundle> fixture_pack(unsigned seed = 20240501);
// <dir>/<name>/google/run{1,2}/
void write_fixture_pack(const std::filesystem::path& dir, unsigned seed = 20240501);

struct PrivacyFixture {
    std::string name;
    std::string idp;
    ProfileKind profile;
    bool expect_tel;
    TraceBuilder trace;
};

std::vector<PrivacyFixture> privacy_pack(unsigned seed = 7);
// <dir>/<domain>/<idp>/{consent,noconsent}/
void write_privacy_pack(const std::filesystem::path& dir, unsigned seed = 7);

} // namespace ssoaudit::testing
