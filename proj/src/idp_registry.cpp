#include "ssoaudit/idp_registry.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "ssoaudit/domain.hpp"
#include "ssoaudit/error.hpp"

namespace ssoaudit {

namespace {

std::vector<std::string_view> split_path(std::string_view path) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < path.size()) {
        std::size_t slash = path.find('/', pos);
        if (slash == std::string_view::npos) slash = path.size();
        if (slash > pos) out.push_back(path.substr(pos, slash - pos));
        pos = slash + 1;
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

std::string pattern_host(std::string_view pattern) {
    auto slash = pattern.find('/');
    std::string host(pattern.substr(0, slash));
    std::transform(host.begin(), host.end(), host.begin(), [](unsigned char c) { return std::tolower(c); });
    return host;
}

} // namespace

bool endpoint_matches(std::string_view pattern, const Url& url) {
    auto slash = pattern.find('/');
    std::string host = pattern_host(pattern);
    if (host != url.host) return false;
    if (slash == std::string_view::npos) return true;
    auto want = split_path(pattern.substr(slash));
    auto have = split_path(url.path);
    if (have.size() < want.size()) return false;
    for (std::size_t i = 0; i < want.size(); ++i) {
        if (want[i] != "*" && want[i] != have[i]) return false;
    }
    return true;
}

IdpRegistry IdpRegistry::defaults() {
    return IdpRegistry({
        {"Google",
         {"accounts.google.com/o/oauth2/auth", "accounts.google.com/o/oauth2/v2/auth"},
         {"oauth2.googleapis.com/token", "accounts.google.com/o/oauth2/token", "www.googleapis.com/oauth2/v4/token"},
         {"google.com", "googleapis.com", "gstatic.com", "googleusercontent.com"}},
        {"Facebook",
         {"www.facebook.com/dialog/oauth", "www.facebook.com/*/dialog/oauth", "m.facebook.com/dialog/oauth",
          "m.facebook.com/*/dialog/oauth", "web.facebook.com/dialog/oauth", "web.facebook.com/*/dialog/oauth",
          "facebook.com/dialog/oauth", "facebook.com/*/dialog/oauth"},
         {"graph.facebook.com/oauth/access_token", "graph.facebook.com/*/oauth/access_token"},
         {"facebook.com", "facebook.net", "fbcdn.net"}},
        {"Apple", {"appleid.apple.com/auth/authorize"}, {"appleid.apple.com/auth/token"}, {"apple.com"}},
    });
}

IdpRegistry IdpRegistry::from_json(std::string_view text) {
    auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("idps") || !doc["idps"].is_array())
        throw MalformedInput("IdP registry must be an object with an 'idps' array");
    std::vector<IdpEntry> idps;
    auto strings = [](const nlohmann::json& obj, const char* key) {
        std::vector<std::string> out;
        if (auto it = obj.find(key); it != obj.end()) {
            if (!it->is_array()) throw MalformedInput(std::string("IdP registry: '") + key + "' must be an array");
            for (const auto& v : *it) {
                if (!v.is_string()) throw MalformedInput(std::string("IdP registry: '") + key + "' must hold strings");
                out.push_back(v.get<std::string>());
            }
        }
        return out;
    };
    for (const auto& item : doc["idps"]) {
        if (!item.is_object() || !item.contains("name") || !item["name"].is_string())
            throw MalformedInput("IdP registry: every entry needs a name");
        idps.push_back({item["name"].get<std::string>(), strings(item, "authorization_endpoints"),
                        strings(item, "token_endpoints"), strings(item, "domains")});
    }
    return IdpRegistry(std::move(idps));
}

std::string IdpRegistry::to_json() const {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& idp : idps_) {
        arr.push_back({{"name", idp.name},
                       {"authorization_endpoints", idp.authorization_endpoints},
                       {"token_endpoints", idp.token_endpoints},
                       {"domains", idp.domains}});
    }
    return nlohmann::ordered_json{{"idps", arr}}.dump(2);
}

const IdpEntry* IdpRegistry::find(std::string_view name) const {
    for (const auto& idp : idps_) {
        if (iequals(idp.name, name)) return &idp;
    }
    return nullptr;
}

const IdpEntry* IdpRegistry::match_authorization(const Url& url) const {
    for (const auto& idp : idps_) {
        for (const auto& p : idp.authorization_endpoints) {
            if (endpoint_matches(p, url)) return &idp;
        }
    }
    return nullptr;
}

const IdpEntry* IdpRegistry::match_token(const Url& url) const {
    for (const auto& idp : idps_) {
        for (const auto& p : idp.token_endpoints) {
            if (endpoint_matches(p, url)) return &idp;
        }
    }
    return nullptr;
}

const IdpEntry* IdpRegistry::owner_of_host(std::string_view host) const {
    std::string site = registrable_domain(host);
    for (const auto& idp : idps_) {
        auto domains = domains_of(idp);
        if (std::find(domains.begin(), domains.end(), site) != domains.end()) return &idp;
    }
    return nullptr;
}

std::vector<std::string> IdpRegistry::domains_of(const IdpEntry& idp) const {
    std::vector<std::string> out;
    auto add = [&](std::string d) {
        if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(std::move(d));
    };
    for (const auto* list : {&idp.authorization_endpoints, &idp.token_endpoints}) {
        for (const auto& p : *list) add(registrable_domain(pattern_host(p)));
    }
    for (const auto& d : idp.domains) add(registrable_domain(d));
    return out;
}

} // namespace ssoaudit
