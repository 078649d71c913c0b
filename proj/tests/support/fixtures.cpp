#include "fixtures.hpp"

#include <fstream>

#include <json.hpp>

#include "ssoaudit/codec.hpp"
#include "ssoaudit/spar.hpp"
#include "ssoaudit/url.hpp"

namespace fs = std::filesystem;

namespace ssoaudit::testing {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string pick(std::mt19937& rng, std::string_view alphabet, std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, alphabet.size() - 1);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += alphabet[d(rng)];
    return out;
}

void write_text(const fs::path& file, const std::string& text) {
    fs::create_directories(file.parent_path());
    std::ofstream f(file, std::ios::binary);
    f << text;
}

} // namespace

std::string random_hex(std::mt19937& rng, std::size_t n) { return pick(rng, "0123456789abcdef", n); }

std::string random_digits(std::mt19937& rng, std::size_t n) {
    // leading zero would still be fine, but keep the number 8 digits wide
    return pick(rng, "123456789", 1) + pick(rng, "0123456789", n - 1);
}

std::string random_b64url(std::mt19937& rng, std::size_t n) {
    return pick(rng, "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_", n);
}

std::string make_jwt(std::mt19937& rng, const std::string& alg, const std::string& payload_json) {
    ordered_json header = {{"alg", alg}, {"kid", "k1"}, {"typ", "JWT"}};
    std::string signature = alg == "none" ? "" : random_b64url(rng, 86);
    return spar::encode::jwt(header.dump(), payload_json, signature);
}

TraceBuilder::TraceBuilder(std::string domain, std::string idp, ProfileKind kind, int run_index, std::string page_url,
                           std::string start)
    : domain_(std::move(domain)), idp_(std::move(idp)), page_url_(std::move(page_url)), kind_(kind),
      run_index_(run_index), start_(*parse_timestamp(start)) {
    if (page_url_.empty()) page_url_ = "https://www." + domain_ + "/";
}

TraceBuilder& TraceBuilder::add(EntrySpec e) {
    entries_.push_back({std::move(e), clock_ms_});
    clock_ms_ += 50;
    return *this;
}

TraceBuilder& TraceBuilder::ibc(IbcKind kind, std::string source, std::string target, std::string payload) {
    events_.push_back({kind, std::move(source), std::move(target), std::move(payload), clock_ms_});
    clock_ms_ += 50;
    return *this;
}

std::string TraceBuilder::har_json() const {
    ordered_json entries = ordered_json::array();
    for (const auto& [e, at] : entries_) {
        ordered_json headers = ordered_json::array();
        for (const auto& h : e.headers) headers.push_back({{"name", h.name}, {"value", h.value}});
        ordered_json qs = ordered_json::array();
        if (auto u = parse_url(e.url))
            for (const auto& [k, v] : query_pairs(*u)) qs.push_back({{"name", k}, {"value", v}});
        ordered_json req = {{"method", e.method},       {"url", e.url},  {"httpVersion", "HTTP/2"},
                            {"headers", headers},       {"queryString", qs}, {"cookies", ordered_json::array()},
                            {"headersSize", -1},        {"bodySize", e.post_body ? e.post_body->size() : 0}};
        if (e.post_body) req["postData"] = {{"mimeType", e.post_mime}, {"text", *e.post_body}};
        ordered_json resp_headers = ordered_json::array();
        resp_headers.push_back({{"name", "content-type"}, {"value", e.response_mime}});
        if (e.location) resp_headers.push_back({{"name", "location"}, {"value", *e.location}});
        ordered_json resp = {
            {"status", e.status},
            {"statusText", ""},
            {"httpVersion", "HTTP/2"},
            {"headers", resp_headers},
            {"cookies", ordered_json::array()},
            {"content", {{"size", e.response_body.size()}, {"mimeType", e.response_mime}, {"text", e.response_body}}},
            {"redirectURL", e.location.value_or("")},
            {"headersSize", -1},
            {"bodySize", e.response_body.size()}};
        entries.push_back({{"startedDateTime", format_timestamp(start_ + std::chrono::milliseconds(at))},
                           {"time", 12},
                           {"request", req},
                           {"response", resp},
                           {"cache", ordered_json::object()},
                           {"timings", {{"send", 1}, {"wait", 10}, {"receive", 1}}},
                           {"_resourceType", e.resource_type}});
    }
    ordered_json har = {{"log",
                         {{"version", "1.2"},
                          {"creator", {{"name", "fixture-recorder"}, {"version", "1"}}},
                          {"pages", ordered_json::array()},
                          {"entries", entries}}}};
    return har.dump(1);
}

std::string TraceBuilder::meta_json() const {
    ordered_json meta = {{"domain", domain_},
                         {"idp", idp_},
                         {"page_url", page_url_},
                         {"captured_at", format_timestamp(start_)},
                         {"profile_kind", to_string(kind_)},
                         {"run_index", run_index_}};
    return meta.dump(2);
}

std::optional<std::string> TraceBuilder::ibc_json() const {
    if (events_.empty()) return std::nullopt;
    ordered_json arr = ordered_json::array();
    for (const auto& e : events_) {
        arr.push_back({{"kind", to_string(e.kind)},
                       {"source_origin", e.source},
                       {"target_origin", e.target},
                       {"payload", e.payload},
                       {"at", format_timestamp(start_ + std::chrono::milliseconds(e.at_ms))}});
    }
    return arr.dump(2);
}

Trace TraceBuilder::build() const {
    auto ibc = ibc_json();
    return parse_trace_bundle(har_json(), meta_json(), ibc ? std::optional<std::string_view>(*ibc) : std::nullopt);
}

void TraceBuilder::write(const fs::path& dir) const {
    write_text(dir / "trace.har", har_json());
    write_text(dir / "meta.json", meta_json());
    if (auto ibc = ibc_json()) write_text(dir / "ibc.json", *ibc);
}

std::string fixture_domain(const LoginSpec& spec) { return spec.slug + ".test"; }

TraceBuilder build_login(const LoginSpec& spec, int run, std::mt19937& rng) {
    const std::string domain = fixture_domain(spec);
    const std::string site = "https://www." + domain;
    const std::string redirect_uri = spec.redirect_uri.empty() ? site + "/auth/callback" : spec.redirect_uri;
    const std::string client_id = "81724-" + spec.slug + ".apps.googleusercontent.com";
    TraceBuilder t(domain, "Google", ProfileKind::login_run, run, site + "/login",
                   run == 1 ? "2024-05-01T10:00:00.000Z" : "2024-05-01T10:05:00.000Z");

    auto csrf_value = [&](Csrf c) -> std::optional<std::string> {
        switch (c) {
        case Csrf::none: return std::nullopt;
        case Csrf::strong: return random_hex(rng, 32);
        case Csrf::digits8: return random_digits(rng, 8);
        }
        return std::nullopt;
    };
    auto state = csrf_value(spec.state);
    auto nonce = csrf_value(spec.nonce);

    std::vector<codec::Pair> params = {{"client_id", client_id},
                                       {"redirect_uri", redirect_uri},
                                       {"response_type", spec.response_type},
                                       {"scope", spec.scope}};
    if (state) params.emplace_back("state", *state);
    if (nonce) params.emplace_back("nonce", *nonce);
    if (spec.pkce) {
        params.emplace_back("code_challenge", random_b64url(rng, 43));
        params.emplace_back("code_challenge_method", "S256");
    }
    if (spec.response_mode) params.emplace_back("response_mode", *spec.response_mode);
    for (const auto& p : spec.extra_params) params.push_back(p);
    const std::string auth_url = "https://accounts.google.com/o/oauth2/v2/auth?" + codec::form_encode(params);

    t.add({.url = site + "/login", .response_body = "<html><button>Sign in with Google</button></html>"});

    std::map<std::string, std::string> creds;
    std::vector<codec::Pair> response;
    for (const auto& what : spec.returned) {
        if (what == "code") {
            creds["code"] = "4/" + random_b64url(rng, 40);
            response.emplace_back("code", creds["code"]);
        } else if (what == "access_token") {
            creds["access_token"] = "ya29." + random_b64url(rng, 60);
            response.emplace_back("access_token", creds["access_token"]);
            response.emplace_back("token_type", "Bearer");
        } else if (what == "id_token") {
            std::string token;
            if (spec.malformed_id_token) {
                token = spar::encode::base64url(R"({"alg":"RS256"})") + "." +
                        spar::encode::base64url(R"({"sub":"1"})");
            } else {
                ordered_json claims = {{"iss", "https://accounts.google.com"},
                                       {"aud", client_id},
                                       {"sub", random_digits(rng, 21)},
                                       {"iat", 1714557600 + run * 300},
                                       {"exp", 1714561200 + run * 300}};
                if (nonce) claims["nonce"] = *nonce;
                if (spec.at_hash) claims["at_hash"] = random_b64url(rng, 22);
                token = make_jwt(rng, spec.id_token_alg, claims.dump());
            }
            creds["id_token"] = token;
            response.emplace_back("id_token", token);
        }
    }
    if (state) response.emplace_back("state", *state);
    if (spec.delivery != Delivery::none && response.size() > (state ? 1u : 0u)) {
        if (!spec.scope.empty()) response.emplace_back("scope", spec.scope);
    }
    const std::string encoded = codec::form_encode(response);

    switch (spec.delivery) {
    case Delivery::none:
        t.add({.url = auth_url, .response_body = "<html><form>Choose an account</form></html>"});
        break;
    case Delivery::query:
    case Delivery::fragment: {
        const bool query = spec.delivery == Delivery::query;
        std::string target = redirect_uri;
        if (query)
            target += (redirect_uri.find('?') == std::string::npos ? "?" : "&") + encoded;
        else
            target += "#" + encoded;
        t.add({.url = auth_url, .status = spec.idp_status, .location = target, .response_body = ""});
        t.add({.url = query ? target : redirect_uri, .response_body = "<html>signed in</html>"});
        break;
    }
    case Delivery::form_post:
        t.add({.url = auth_url,
               .response_body = "<html><form method=post action=\"" + redirect_uri + "\"></form></html>"});
        t.add({.method = "POST",
               .url = redirect_uri,
               .post_body = encoded,
               .response_body = "<html>signed in</html>"});
        break;
    }
    if (spec.after) spec.after(t, creds);
    return t;
}

std::vector<FixtureBundle> fixture_pack(unsigned seed) {
    std::vector<std::pair<std::string, LoginSpec>> specs;
    auto add = [&](std::string name, LoginSpec s) {
        s.slug = name;
        for (auto& c : s.slug)
            if (c == '.') c = '-';
        specs.emplace_back(std::move(name), std::move(s));
    };

    add("baseline", {});
    add("flow.obsolete", {.response_type = "token",
                          .scope = "email profile",
                          .pkce = false,
                          .delivery = Delivery::fragment,
                          .returned = {"access_token"}});
    add("protocol.mixup", {.response_type = "code id_token",
                           .scope = "name email",
                           .nonce = Csrf::strong,
                           .response_mode = "form_post",
                           .delivery = Delivery::form_post,
                           .returned = {"code", "id_token"}});
    add("flow.mixup", {.nonce = Csrf::strong, .delivery = Delivery::fragment, .returned = {"code", "id_token"}});
    add("redirect.nested-url", {.redirect_uri = "https://www.redirect-nested-url.test/auth/callback?next=" +
                                                 codec::percent_encode("https://evil.example/")});
    add("csrf.weak", {.state = Csrf::digits8, .nonce = Csrf::digits8, .pkce = false});
    add("csrf.missing", {.scope = "email", .state = Csrf::none, .pkce = false, .delivery = Delivery::none});
    add("secret.client-secret-fc", {.extra_params = {{"client_secret", "GOCSPX-Zk2wQe9X4mLr0Tt7aVb1cD3e"}}});
    add("secret.referer-leak", {.after = [](TraceBuilder& t, const std::map<std::string, std::string>& creds) {
            t.add({.url = "https://pixel.adnet-tracker.test/p.gif?ev=pageview",
                   .headers = {{"Referer", "https://www.secret-referer-leak.test/auth/callback?code=" +
                                               codec::percent_encode(creds.at("code"))}},
                   .resource_type = "image",
                   .response_body = "GIF89a",
                   .response_mime = "image/gif"});
        }});
    add("secret.token-in-url", {.response_type = "code id_token",
                                .nonce = Csrf::strong,
                                .response_mode = "query",
                                .returned = {"code", "id_token"}});
    add("tls.plain-redirect-uri",
        {.redirect_uri = "http://www.tls-plain-redirect-uri.test/auth/callback", .delivery = Delivery::none});
    add("tls.plain-request", {.after = [](TraceBuilder& t, const std::map<std::string, std::string>&) {
            t.add({.url = "http://static.tls-plain-request.test/legacy.js",
                   .resource_type = "script",
                   .response_body = "void 0;",
                   .response_mime = "application/javascript"});
        }});
    add("redirect.307-authz-response", {.idp_status = 307});
    add("inject.code-unprotected", {.pkce = false});
    add("inject.at-hash-missing", {.response_type = "id_token token",
                                   .nonce = Csrf::strong,
                                   .pkce = false,
                                   .delivery = Delivery::fragment,
                                   .returned = {"access_token", "id_token"}});
    add("idtoken.symmetric-alg", {.response_type = "code id_token",
                                  .nonce = Csrf::strong,
                                  .delivery = Delivery::fragment,
                                  .returned = {"code", "id_token"},
                                  .id_token_alg = "HS256"});
    add("idtoken.alg-none", {.response_type = "code id_token",
                             .nonce = Csrf::strong,
                             .delivery = Delivery::fragment,
                             .returned = {"code", "id_token"},
                             .id_token_alg = "none"});
    add("idtoken.malformed", {.response_type = "code id_token",
                              .nonce = Csrf::strong,
                              .delivery = Delivery::fragment,
                              .returned = {"code", "id_token"},
                              .malformed_id_token = true});

    std::vector<FixtureBundle> out;
    std::mt19937 rng(seed);
    for (const auto& [name, spec] : specs) {
        std::optional<std::string> trigger;
        if (name != "baseline") trigger = name;
        auto r1 = build_login(spec, 1, rng);
        auto r2 = build_login(spec, 2, rng);
        out.push_back({name, trigger, std::move(r1), std::move(r2)});
    }
    return out;
}

void write_fixture_pack(const fs::path& dir, unsigned seed) {
    for (const auto& b : fixture_pack(seed)) {
        b.run1.write(dir / b.name / "google" / "run1");
        b.run2.write(dir / b.name / "google" / "run2");
    }
}

std::vector<PrivacyFixture> privacy_pack(unsigned seed) {
    std::mt19937 rng(seed);
    std::vector<PrivacyFixture> out;

    auto google = [&](const std::string& slug, ProfileKind profile, bool tokens) {
        const std::string domain = slug + ".test";
        const std::string site = "https://www." + domain;
        TraceBuilder t(domain, "Google", profile, 1, site + "/");
        t.add({.url = site + "/", .response_body = "<html><a href=/news>News</a></html>"});
        const std::string state = random_hex(rng, 32);
        const std::string client_id = "5521-" + slug + ".apps.googleusercontent.com";
        const std::string nonce = random_hex(rng, 32);
        std::vector<codec::Pair> params = {{"client_id", client_id},
                                           {"redirect_uri", site + "/auth/silent"},
                                           {"response_type", "id_token"},
                                           {"scope", "openid email"},
                                           {"prompt", "none"},
                                           {"response_mode", "web_message"},
                                           {"state", state},
                                           {"nonce", nonce}};
        t.add({.url = "https://accounts.google.com/o/oauth2/v2/auth?" + codec::form_encode(params),
               .resource_type = "sub_frame"});
        ordered_json payload;
        if (tokens) {
            ordered_json claims = {{"iss", "https://accounts.google.com"}, {"aud", client_id},
                                   {"sub", random_digits(rng, 21)},      {"nonce", nonce}};
            payload = {{"id_token", make_jwt(rng, "RS256", claims.dump())}, {"state", state}};
        } else {
            payload = {{"error", "interaction_required"}, {"state", state}};
        }
        t.ibc(IbcKind::post_message, "https://accounts.google.com", site, payload.dump());
        return t;
    };
    auto facebook = [&](const std::string& slug, ProfileKind profile, bool tokens) {
        const std::string domain = slug + ".test";
        const std::string site = "https://www." + domain;
        TraceBuilder t(domain, "Facebook", profile, 1, site + "/");
        t.add({.url = site + "/", .response_body = "<html><a href=/shop>Shop</a></html>"});
        const std::string state = random_hex(rng, 32);
        const std::string cb = site + "/fb/callback";
        std::vector<codec::Pair> params = {{"client_id", "8890021"},
                                           {"redirect_uri", cb},
                                           {"response_type", "code"},
                                           {"scope", "public_profile email"},
                                           {"state", state}};
        const std::string auth = "https://www.facebook.com/v18.0/dialog/oauth?" + codec::form_encode(params);
        if (tokens) {
            std::string target = cb + "?code=" + random_b64url(rng, 64) + "&state=" + state;
            t.add({.url = auth, .status = 302, .location = target, .resource_type = "sub_frame", .response_body = ""});
            t.add({.url = target, .resource_type = "sub_frame"});
        } else {
            t.add({.url = auth, .resource_type = "sub_frame", .response_body = "<html>Log in to Facebook</html>"});
        }
        return t;
    };

    out.push_back({"news-noconsent", "Google", ProfileKind::no_consent_visit, false,
                   google("news-site", ProfileKind::no_consent_visit, false)});
    out.push_back({"news-consent", "Google", ProfileKind::consent_given_visit, true,
                   google("news-site", ProfileKind::consent_given_visit, true)});
    out.push_back({"shop-noconsent", "Facebook", ProfileKind::no_consent_visit, false,
                   facebook("shop-site", ProfileKind::no_consent_visit, false)});
    out.push_back({"shop-consent", "Facebook", ProfileKind::consent_given_visit, true,
                   facebook("shop-site", ProfileKind::consent_given_visit, true)});
    return out;
}

void write_privacy_pack(const fs::path& dir, unsigned seed) {
    for (const auto& f : privacy_pack(seed)) {
        std::string idp = f.idp == "Google" ? "google" : "facebook";
        std::string domain = f.name.substr(0, f.name.find('-')) + "-site.test";
        f.trace.write(dir / domain / idp /
                      (f.profile == ProfileKind::consent_given_visit ? "consent" : "noconsent"));
    }
}

} // namespace ssoaudit::testing
