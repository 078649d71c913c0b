#include "ssoaudit/trace.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "ssoaudit/error.hpp"

namespace ssoaudit {

using json = nlohmann::json;

namespace {

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

bool read_digits(std::string_view s, std::size_t& pos, std::size_t count, int& out) {
    if (pos + count > s.size()) return false;
    int v = 0;
    for (std::size_t i = 0; i < count; ++i) {
        char c = s[pos + i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    pos += count;
    return true;
}

bool expect(std::string_view s, std::size_t& pos, char c) {
    if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
    }
    return false;
}

std::string string_or(const json& obj, const char* key, std::string fallback = {}) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return fallback;
    return it->get<std::string>();
}

std::vector<Header> read_headers(const json& obj) {
    std::vector<Header> out;
    auto it = obj.find("headers");
    if (it == obj.end() || !it->is_array()) return out;
    for (const auto& h : *it) {
        if (!h.is_object()) continue;
        out.push_back({string_or(h, "name"), string_or(h, "value")});
    }
    return out;
}

Body make_body(std::string mime, std::string text, std::size_t limit, bool already_truncated = false) {
    Body body{std::move(mime), std::move(text), already_truncated};
    if (body.text.size() > limit) {
        body.text.resize(limit);
        body.truncated = true;
    }
    return body;
}

bool is_redirect_status(int status) {
    return status == 301 || status == 302 || status == 303 || status == 307 || status == 308;
}

HttpEntry read_entry(const json& e, std::size_t index, const ParseOptions& options) {
    if (!e.is_object()) throw EntryError(index, "entry is not an object");
    auto req_it = e.find("request");
    auto resp_it = e.find("response");
    if (req_it == e.end() || !req_it->is_object()) throw EntryError(index, "missing request");
    if (resp_it == e.end() || !resp_it->is_object()) throw EntryError(index, "missing response");
    const json& req = *req_it;
    const json& resp = *resp_it;

    HttpEntry entry;
    auto started = parse_timestamp(string_or(e, "startedDateTime"));
    if (!started) throw EntryError(index, "bad startedDateTime");
    entry.started_at = *started;

    entry.request.method = string_or(req, "method", "GET");
    entry.request.url = string_or(req, "url");
    auto url = parse_url(entry.request.url);
    if (!url) throw EntryError(index, "URL is not absolute: '" + entry.request.url + "'");
    entry.request.parsed_url = *url;
    entry.request.query = query_pairs(*url);
    entry.request.headers = read_headers(req);
    entry.request.resource_type = string_or(e, "_resourceType");
    if (auto pd = req.find("postData"); pd != req.end() && pd->is_object()) {
        std::string text = string_or(*pd, "text");
        if (text.empty()) {
            // Some recorders only fill params[].
            if (auto params = pd->find("params"); params != pd->end() && params->is_array()) {
                std::vector<codec::Pair> pairs;
                for (const auto& p : *params) {
                    if (p.is_object()) pairs.emplace_back(string_or(p, "name"), string_or(p, "value"));
                }
                text = codec::form_encode(pairs);
            }
        }
        entry.request.body = make_body(string_or(*pd, "mimeType"), std::move(text), options.max_body_bytes,
                                       pd->value("_truncated", false));
    }

    auto status_it = resp.find("status");
    if (status_it == resp.end() || !status_it->is_number_integer()) throw EntryError(index, "missing status");
    entry.response.status = status_it->get<int>();
    if (entry.response.status != 0 && (entry.response.status < 100 || entry.response.status > 599))
        throw EntryError(index, "status out of range");
    entry.response.headers = read_headers(resp);
    if (auto content = resp.find("content"); content != resp.end() && content->is_object()) {
        std::string text = string_or(*content, "text");
        if (string_or(*content, "encoding") == "base64") {
            auto decoded = codec::base64_decode(text, codec::Base64Alphabet::standard);
            if (!decoded) throw EntryError(index, "content.text is not valid base64");
            text = std::move(*decoded);
        }
        entry.response.body = make_body(string_or(*content, "mimeType"), std::move(text), options.max_body_bytes,
                                        content->value("_truncated", false));
    }
    if (is_redirect_status(entry.response.status)) {
        if (const Header* loc = find_header(entry.response.headers, "location")) {
            entry.response.redirect_target = resolve_url(entry.request.url, loc->value);
        }
    }
    return entry;
}

IbcEvent read_ibc_event(const json& e, std::size_t index) {
    auto fail = [&](const std::string& what) {
        return MalformedInput("ibc event " + std::to_string(index) + ": " + what);
    };
    if (!e.is_object()) throw fail("not an object");
    IbcEvent ev;
    std::string kind = string_or(e, "kind");
    if (kind == "post-message") {
        ev.kind = IbcKind::post_message;
    } else if (kind == "fragment-change") {
        ev.kind = IbcKind::fragment_change;
    } else {
        throw fail("unknown kind '" + kind + "'");
    }
    ev.source_origin = string_or(e, "source_origin");
    ev.target_origin = string_or(e, "target_origin");
    auto valid_origin = [](const std::string& o) {
        if (o == "*" || o == "null") return true;
        auto u = parse_url(o);
        return u && u->path.empty() && !u->query && !u->fragment && u->userinfo.empty();
    };
    if (!valid_origin(ev.source_origin)) throw fail("bad source_origin '" + ev.source_origin + "'");
    if (!valid_origin(ev.target_origin)) throw fail("bad target_origin '" + ev.target_origin + "'");

    auto payload = e.find("payload");
    if (payload == e.end() || payload->is_null()) {
        ev.payload.clear();
    } else if (payload->is_string()) {
        ev.payload = payload->get<std::string>();
    } else {
        ev.payload = payload->dump();
    }

    auto at = e.find("at");
    if (at == e.end()) throw fail("missing 'at'");
    if (at->is_number()) {
        ev.at = Timestamp(std::chrono::milliseconds(at->get<long long>()));
    } else if (at->is_string()) {
        auto ts = parse_timestamp(at->get<std::string>());
        if (!ts) throw fail("bad 'at'");
        ev.at = *ts;
    } else {
        throw fail("bad 'at'");
    }
    return ev;
}

std::vector<IbcEvent> read_ibc_array(const json& arr) {
    if (!arr.is_array()) throw MalformedInput("IBC document is not an array");
    std::vector<IbcEvent> out;
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(read_ibc_event(arr[i], i));
    return out;
}

json parse_json(std::string_view bytes, const char* what) {
    json doc = json::parse(bytes, nullptr, false);
    if (doc.is_discarded()) throw MalformedInput(std::string(what) + " is not valid JSON");
    return doc;
}

struct HarContents {
    std::vector<HttpEntry> entries;
    std::vector<IbcEvent> ibc;
};

HarContents read_har(std::string_view bytes, const ParseOptions& options) {
    json doc = parse_json(bytes, "HAR");
    if (!doc.is_object()) throw MalformedInput("HAR root is not an object");
    auto log = doc.find("log");
    if (log == doc.end() || !log->is_object()) throw MalformedInput("HAR has no log object");
    auto entries = log->find("entries");
    if (entries == log->end() || !entries->is_array()) throw MalformedInput("HAR has no log.entries array");

    HarContents out;
    out.entries.reserve(entries->size());
    std::vector<std::string> initiator_urls;
    for (std::size_t i = 0; i < entries->size(); ++i) {
        const json& e = (*entries)[i];
        out.entries.push_back(read_entry(e, i, options));
        std::string init;
        if (auto it = e.find("_initiator"); it != e.end() && it->is_object()) init = string_or(*it, "url");
        initiator_urls.push_back(std::move(init));
    }
    // Initiator URLs become indices into the file order; Trace re-maps them after sorting.
    for (std::size_t i = 0; i < out.entries.size(); ++i) {
        if (initiator_urls[i].empty()) continue;
        for (std::size_t j = i; j-- > 0;) {
            if (out.entries[j].request.url == initiator_urls[i]) {
                out.entries[i].initiator = j;
                break;
            }
        }
    }
    if (auto ibc = log->find("_ibc"); ibc != log->end()) out.ibc = read_ibc_array(*ibc);
    return out;
}

json headers_json(const std::vector<Header>& headers) {
    json arr = json::array();
    for (const auto& h : headers) arr.push_back({{"name", h.name}, {"value", h.value}});
    return arr;
}

} // namespace

std::optional<Timestamp> parse_timestamp(std::string_view s) {
    std::size_t pos = 0;
    int y, mo, d, h, mi, sec;
    if (!read_digits(s, pos, 4, y) || !expect(s, pos, '-') || !read_digits(s, pos, 2, mo) ||
        !expect(s, pos, '-') || !read_digits(s, pos, 2, d))
        return std::nullopt;
    if (pos >= s.size() || (s[pos] != 'T' && s[pos] != 't' && s[pos] != ' ')) return std::nullopt;
    ++pos;
    if (!read_digits(s, pos, 2, h) || !expect(s, pos, ':') || !read_digits(s, pos, 2, mi) ||
        !expect(s, pos, ':') || !read_digits(s, pos, 2, sec))
        return std::nullopt;
    long long millis = 0;
    if (expect(s, pos, '.')) {
        int digits = 0;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
            if (digits < 3) millis = millis * 10 + (s[pos] - '0');
            ++digits;
            ++pos;
        }
        if (digits == 0) return std::nullopt;
        for (int i = digits; i < 3; ++i) millis *= 10;
    }
    int offset_minutes = 0;
    if (pos < s.size()) {
        char z = s[pos];
        if (z == 'Z' || z == 'z') {
            ++pos;
        } else if (z == '+' || z == '-') {
            ++pos;
            int oh, om = 0;
            if (!read_digits(s, pos, 2, oh)) return std::nullopt;
            expect(s, pos, ':');
            if (pos < s.size() && !read_digits(s, pos, 2, om)) return std::nullopt;
            offset_minutes = (oh * 60 + om) * (z == '-' ? -1 : 1);
        } else {
            return std::nullopt;
        }
    }
    if (pos != s.size()) return std::nullopt;
    if (h > 23 || mi > 59 || sec > 60) return std::nullopt;

    using namespace std::chrono;
    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    Timestamp ts = time_point_cast<milliseconds>(sys_days{ymd}) + hours{h} + minutes{mi} + seconds{sec} +
                   milliseconds{millis} - minutes{offset_minutes};
    return ts;
}

std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    auto day_point = floor<days>(ts);
    year_month_day ymd{day_point};
    auto rem = ts - day_point;
    auto h = duration_cast<hours>(rem);
    rem -= h;
    auto m = duration_cast<minutes>(rem);
    rem -= m;
    auto s = duration_cast<seconds>(rem);
    rem -= s;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(h.count()),
                  static_cast<int>(m.count()), static_cast<int>(s.count()), static_cast<int>(rem.count()));
    return buf;
}

const Header* find_header(const std::vector<Header>& headers, std::string_view name) {
    for (const auto& h : headers) {
        if (iequals(h.name, name)) return &h;
    }
    return nullptr;
}

bool HttpEntry::is_navigation() const {
    if (!request.resource_type.empty()) return request.resource_type == "document";
    if (is_redirect()) return true;
    return response.body.mime_type.find("text/html") != std::string::npos;
}

std::string_view to_string(ProfileKind kind) {
    switch (kind) {
    case ProfileKind::login_run: return "login-run";
    case ProfileKind::consent_given_visit: return "consent-given-visit";
    case ProfileKind::no_consent_visit: return "no-consent-visit";
    }
    return "login-run";
}

std::optional<ProfileKind> profile_kind_from_string(std::string_view text) {
    if (text == "login-run") return ProfileKind::login_run;
    if (text == "consent-given-visit") return ProfileKind::consent_given_visit;
    if (text == "no-consent-visit") return ProfileKind::no_consent_visit;
    return std::nullopt;
}

std::string_view to_string(IbcKind kind) {
    return kind == IbcKind::post_message ? "post-message" : "fragment-change";
}

Trace::Trace(TraceMetadata metadata, std::vector<HttpEntry> entries, std::vector<IbcEvent> ibc_events)
    : metadata_(std::move(metadata)) {
    std::vector<std::size_t> order(entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return entries[a].started_at < entries[b].started_at; });
    std::vector<std::size_t> new_pos(entries.size());
    for (std::size_t i = 0; i < order.size(); ++i) new_pos[order[i]] = i;

    entries_.reserve(entries.size());
    for (std::size_t i : order) {
        HttpEntry e = std::move(entries[i]);
        if (e.initiator) {
            if (*e.initiator < new_pos.size())
                e.initiator = new_pos[*e.initiator];
            else
                e.initiator.reset();
        }
        entries_.push_back(std::move(e));
    }
    ibc_events_ = std::move(ibc_events);
    std::stable_sort(ibc_events_.begin(), ibc_events_.end(),
                     [](const IbcEvent& a, const IbcEvent& b) { return a.at < b.at; });
}

Trace parse_har(std::string_view bytes, const ParseOptions& options) {
    HarContents har = read_har(bytes, options);
    TraceMetadata meta;
    if (!har.entries.empty()) {
        meta.page_url = har.entries.front().request.url;
        meta.domain = har.entries.front().request.parsed_url.host;
        meta.captured_at = har.entries.front().started_at;
    }
    return Trace(std::move(meta), std::move(har.entries), std::move(har.ibc));
}

TraceMetadata parse_metadata(std::string_view bytes) {
    json doc = parse_json(bytes, "metadata");
    if (!doc.is_object()) throw MalformedInput("metadata root is not an object");
    auto require = [&](const char* key) -> const json& {
        auto it = doc.find(key);
        if (it == doc.end() || it->is_null()) throw MissingMetadataField(key);
        return *it;
    };
    auto require_string = [&](const char* key) {
        const json& v = require(key);
        if (!v.is_string()) throw MalformedInput(std::string("metadata field '") + key + "' must be a string");
        return v.get<std::string>();
    };

    TraceMetadata meta;
    meta.domain = require_string("domain");
    meta.page_url = require_string("page_url");
    auto captured = parse_timestamp(require_string("captured_at"));
    if (!captured) throw MalformedInput("metadata field 'captured_at' is not a timestamp");
    meta.captured_at = *captured;
    auto kind = profile_kind_from_string(require_string("profile_kind"));
    if (!kind) throw MalformedInput("metadata field 'profile_kind' has an unknown value");
    meta.profile_kind = *kind;
    const json& run = require("run_index");
    if (!run.is_number_integer()) throw MalformedInput("metadata field 'run_index' must be an integer");
    meta.run_index = run.get<int>();
    if (meta.run_index < 1) throw MalformedInput("metadata field 'run_index' must be >= 1");
    if (meta.profile_kind == ProfileKind::login_run && meta.run_index > 2)
        throw MalformedInput("login runs are recorded twice; run_index must be 1 or 2");
    if (auto idp = doc.find("idp"); idp != doc.end() && idp->is_string()) meta.idp_label = idp->get<std::string>();
    if (auto a = doc.find("annotation"); a != doc.end() && a->is_string()) meta.annotation = a->get<std::string>();
    return meta;
}

std::vector<IbcEvent> parse_ibc(std::string_view bytes) { return read_ibc_array(parse_json(bytes, "IBC")); }

Trace parse_trace_bundle(std::string_view har, std::string_view metadata, std::optional<std::string_view> ibc,
                         const ParseOptions& options) {
    TraceMetadata meta = parse_metadata(metadata);
    HarContents contents = read_har(har, options);
    if (ibc) {
        // A sidecar written next to a HAR that already embeds the same
        // events must not double them.
        for (auto& ev : parse_ibc(*ibc)) {
            bool dup = std::any_of(contents.ibc.begin(), contents.ibc.end(), [&](const IbcEvent& have) {
                return have.kind == ev.kind && have.at == ev.at && have.source_origin == ev.source_origin &&
                       have.target_origin == ev.target_origin && have.payload == ev.payload;
            });
            if (!dup) contents.ibc.push_back(std::move(ev));
        }
    }
    return Trace(std::move(meta), std::move(contents.entries), std::move(contents.ibc));
}

std::string serialize_har(const Trace& trace) {
    json entries = json::array();
    for (const auto& e : trace.entries()) {
        json req = {{"method", e.request.method},
                    {"url", e.request.url},
                    {"httpVersion", "HTTP/1.1"},
                    {"headers", headers_json(e.request.headers)},
                    {"cookies", json::array()},
                    {"headersSize", -1},
                    {"bodySize", e.request.body ? static_cast<long long>(e.request.body->text.size()) : 0}};
        json qs = json::array();
        for (const auto& [k, v] : e.request.query) qs.push_back({{"name", k}, {"value", v}});
        req["queryString"] = qs;
        if (e.request.body) {
            req["postData"] = {{"mimeType", e.request.body->mime_type}, {"text", e.request.body->text}};
            if (e.request.body->truncated) req["postData"]["_truncated"] = true;
        }
        json content = {{"size", e.response.body.text.size()}, {"mimeType", e.response.body.mime_type}};
        if (codec::is_printable_utf8(e.response.body.text)) {
            content["text"] = e.response.body.text;
        } else {
            content["text"] = codec::base64_encode(e.response.body.text);
            content["encoding"] = "base64";
        }
        if (e.response.body.truncated) content["_truncated"] = true;
        json resp = {{"status", e.response.status},
                     {"statusText", ""},
                     {"httpVersion", "HTTP/1.1"},
                     {"headers", headers_json(e.response.headers)},
                     {"cookies", json::array()},
                     {"content", content},
                     {"redirectURL", e.response.redirect_target.value_or("")},
                     {"headersSize", -1},
                     {"bodySize", -1}};
        json entry = {{"startedDateTime", format_timestamp(e.started_at)},
                      {"time", 0},
                      {"request", req},
                      {"response", resp},
                      {"cache", json::object()},
                      {"timings", {{"send", 0}, {"wait", 0}, {"receive", 0}}}};
        if (!e.request.resource_type.empty()) entry["_resourceType"] = e.request.resource_type;
        if (e.initiator) entry["_initiator"] = {{"type", "other"}, {"url", trace.entry(*e.initiator).request.url}};
        entries.push_back(std::move(entry));
    }
    json log = {{"version", "1.2"}, {"creator", {{"name", "sso-auditor"}, {"version", "1"}}}, {"entries", entries}};
    if (!trace.ibc_events().empty()) log["_ibc"] = json::parse(serialize_ibc(trace.ibc_events()));
    return json{{"log", log}}.dump();
}

std::string serialize_metadata(const TraceMetadata& m) {
    json doc = {{"domain", m.domain},
                {"page_url", m.page_url},
                {"captured_at", format_timestamp(m.captured_at)},
                {"profile_kind", std::string(to_string(m.profile_kind))},
                {"run_index", m.run_index}};
    doc["idp"] = m.idp_label ? json(*m.idp_label) : json(nullptr);
    if (m.annotation) doc["annotation"] = *m.annotation;
    return doc.dump(2);
}

std::string serialize_ibc(const std::vector<IbcEvent>& events) {
    json arr = json::array();
    for (const auto& ev : events) {
        arr.push_back({{"kind", std::string(to_string(ev.kind))},
                       {"source_origin", ev.source_origin},
                       {"target_origin", ev.target_origin},
                       {"payload", ev.payload},
                       {"at", format_timestamp(ev.at)}});
    }
    return arr.dump(2);
}

std::vector<std::size_t> redirect_chain(const Trace& trace, std::size_t start) {
    if (start >= trace.size()) throw std::out_of_range("redirect_chain: start index out of range");
    std::vector<std::size_t> chain{start};
    std::size_t current = start;
    while (true) {
        const auto& target = trace.entry(current).response.redirect_target;
        if (!target) break;
        std::string wanted = strip_fragment(*target);
        std::optional<std::size_t> next;
        for (std::size_t j = current + 1; j < trace.size(); ++j) {
            if (strip_fragment(trace.entry(j).request.url) == wanted) {
                next = j;
                break;
            }
        }
        if (!next) break;
        chain.push_back(*next);
        current = *next;
    }
    return chain;
}

} // namespace ssoaudit
