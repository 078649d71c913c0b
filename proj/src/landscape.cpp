#include "ssoaudit/landscape.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "ssoaudit/domain.hpp"
#include "ssoaudit/error.hpp"
#include "ssoaudit/html.hpp"
#include "ssoaudit/url.hpp"

namespace ssoaudit {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// needle occurs in haystack on word boundaries
bool contains_words(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return false;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) {
        bool left = pos == 0 || !word_char(haystack[pos - 1]);
        std::size_t end = pos + needle.size();
        bool right = end == haystack.size() || !word_char(haystack[end]);
        if (left && right) return true;
    }
    return false;
}

} // namespace

std::vector<std::string> build_search_queries(std::string_view domain) {
    const std::string d = lower(domain);
    if (d.empty() || !is_valid_hostname(d) || registrable_domain(d) != d || public_suffix(d) == d)
        throw InvalidDomain(std::string(domain));
    const std::string suffix = public_suffix(d);
    const std::string name = d.substr(0, d.size() - suffix.size() - 1);
    return {
        d + " login site:" + d,
        name + " login site:" + d,
        "log in " + name + " site:*." + d,
        name + " login signin signup register account site:" + d,
        "site:" + d + " (intitle:\"login\" OR intitle:\"log in\" OR intitle:\"signin\" OR intitle:\"sign in\")",
    };
}

std::vector<PooledResult> pool_results(const std::vector<RankedList>& lists, int top_k, std::string_view domain) {
    if (top_k < 1) throw std::invalid_argument("top_k must be at least 1");
    const std::string site = registrable_domain(lower(domain));
    struct Slot {
        PooledResult result;
        std::size_t engine_index;
    };
    std::vector<Slot> slots;
    std::map<std::string, std::size_t> index;
    for (std::size_t e = 0; e < lists.size(); ++e) {
        const auto& urls = lists[e].urls;
        const std::size_t keep = std::min(urls.size(), static_cast<std::size_t>(top_k));
        for (std::size_t r = 0; r < keep; ++r) {
            auto u = parse_url(urls[r]);
            if (!u || !(u->scheme == "http" || u->scheme == "https")) continue;
            if (registrable_domain(u->host) != site) continue;
            u->fragment.reset();
            std::string key = u->to_string();
            const int rank = static_cast<int>(r) + 1;
            auto it = index.find(key);
            if (it == index.end()) {
                index.emplace(key, slots.size());
                slots.push_back({{key, rank, lists[e].engine}, e});
            } else if (rank < slots[it->second].result.best_rank) {
                slots[it->second] = {{key, rank, lists[e].engine}, e};
            }
        }
    }
    std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
        return std::tie(a.result.best_rank, a.engine_index) < std::tie(b.result.best_rank, b.engine_index);
    });
    std::vector<PooledResult> out;
    for (auto& s : slots) out.push_back(std::move(s.result));
    return out;
}

KeywordConfig KeywordConfig::defaults() {
    static const std::vector<std::string> verbs = {"sign in with", "log in with", "login with", "signin with",
                                                   "continue with", "sign up with", "connect with"};
    KeywordConfig cfg;
    for (auto [idp, name] : {std::pair{"Google", "google"}, {"Facebook", "facebook"}, {"Apple", "apple"}}) {
        IdpKeywords k;
        k.idp = idp;
        k.names = {name};
        for (const auto& v : verbs) k.phrases.push_back(v + " " + name);
        cfg.idps.push_back(std::move(k));
    }
    return cfg;
}

KeywordConfig KeywordConfig::from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw MalformedInput(std::string("keyword config: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("idps") || !doc["idps"].is_array())
        throw MalformedInput("keyword config: expected {\"idps\": [...]}");
    KeywordConfig cfg;
    try {
        for (const auto& item : doc["idps"]) {
            IdpKeywords k;
            k.idp = item.at("idp").get<std::string>();
            for (const auto& n : item.value("names", json::array())) k.names.push_back(html::normalize_text(n.get<std::string>()));
            for (const auto& p : item.value("phrases", json::array()))
                k.phrases.push_back(html::normalize_text(p.get<std::string>()));
            cfg.idps.push_back(std::move(k));
        }
    } catch (const json::exception& e) {
        throw MalformedInput(std::string("keyword config: ") + e.what());
    }
    return cfg;
}

std::string KeywordConfig::to_json() const {
    ordered_json arr = ordered_json::array();
    for (const auto& k : idps) arr.push_back({{"idp", k.idp}, {"names", k.names}, {"phrases", k.phrases}});
    return ordered_json{{"idps", arr}}.dump(2) + "\n";
}

namespace {

struct Clickable {
    const html::Node* node;
    std::string kind;
};

std::optional<std::string> clickable_kind(const html::Node& n) {
    if (n.type != html::Node::Type::element) return std::nullopt;
    if (n.tag == "a") return "link";
    if (n.tag == "button") return "button";
    if (n.tag == "input") {
        const std::string* type = n.attr("type");
        std::string t = type ? lower(*type) : "";
        if (t == "button" || t == "submit" || t == "image") return "button";
    }
    if (const std::string* role = n.attr("role"); role && lower(*role) == "button") return "clickable";
    if (n.attr("onclick")) return "clickable";
    return std::nullopt;
}

void find_clickables(const html::Node& n, std::vector<Clickable>& out) {
    for (const auto& c : n.children) {
        if (auto kind = clickable_kind(c)) {
            out.push_back({&c, *kind});  // nested clickables belong to this one
        } else {
            find_clickables(c, out);
        }
    }
}

void nested_labels(const html::Node& n, std::vector<std::string>& out) {
    for (const auto& c : n.children) {
        if (c.type != html::Node::Type::element) continue;
        for (std::string_view a : {"alt", "title", "aria-label"})
            if (const std::string* v = c.attr(a); v && !v->empty()) out.push_back(html::normalize_text(*v));
        nested_labels(c, out);
    }
}

std::string collapse_space(std::string_view s) {
    std::string out;
    for (char c : s) {
        bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (space) {
            if (!out.empty() && out.back() != ' ') out += ' ';
        } else {
            out += c;
        }
    }
    if (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

// Text pieces of an element matched separately, so attribute order never
// changes the outcome.
std::vector<std::string> text_pieces(const html::Node& n) {
    std::vector<std::string> pieces{html::normalize_text(n.inner_text())};
    std::vector<std::string> attrs;
    for (const auto& [name, value] : n.attributes) {
        if (name == "href" || name == "src" || name == "style") continue;
        if (!value.empty()) attrs.push_back(html::normalize_text(value));
    }
    std::sort(attrs.begin(), attrs.end());
    pieces.insert(pieces.end(), attrs.begin(), attrs.end());
    nested_labels(n, pieces);
    return pieces;
}

} // namespace

std::vector<SsoCandidate> extract_sso_candidates(std::string_view document, const KeywordConfig& config) {
    html::Node root = html::parse(document);
    std::vector<Clickable> clickables;
    find_clickables(root, clickables);

    struct Prepared {
        const Clickable* c;
        std::vector<std::string> pieces;
    };
    std::vector<Prepared> prepared;
    for (const auto& c : clickables) prepared.push_back({&c, text_pieces(*c.node)});

    auto run_pass = [&](MatchKind kind) {
        std::vector<SsoCandidate> out;
        for (const auto& p : prepared) {
            bool matched = false;
            for (const auto& k : config.idps) {
                const auto& words = kind == MatchKind::phrase ? k.phrases : k.names;
                for (const auto& w : words) {
                    auto hit = std::find_if(p.pieces.begin(), p.pieces.end(),
                                            [&](const std::string& piece) { return contains_words(piece, w); });
                    if (hit == p.pieces.end()) continue;
                    SsoCandidate cand;
                    cand.element_kind = p.c->kind;
                    cand.text = p.pieces.front().empty() ? *hit : collapse_space(p.c->node->inner_text());
                    cand.matched_keyword = w;
                    cand.match = kind;
                    cand.idp = k.idp;
                    cand.position = p.c->node->position;
                    out.push_back(std::move(cand));
                    matched = true;
                    break;
                }
                if (matched) break;
            }
        }
        return out;
    };

    auto out = run_pass(MatchKind::phrase);
    if (out.empty()) out = run_pass(MatchKind::idp_name);
    std::stable_sort(out.begin(), out.end(),
                     [](const SsoCandidate& a, const SsoCandidate& b) { return a.position < b.position; });
    return out;
}

std::string_view to_string(DetectionMethod m) {
    switch (m) {
    case DetectionMethod::keyword: return "keyword";
    case DetectionMethod::image: return "image";
    case DetectionMethod::manual: return "manual";
    }
    return "keyword";
}

std::optional<DetectionMethod> detection_method_from_string(std::string_view text) {
    for (auto m : {DetectionMethod::keyword, DetectionMethod::image, DetectionMethod::manual})
        if (to_string(m) == text) return m;
    return std::nullopt;
}

std::vector<ScanRecord> read_scan_records(std::string_view jsonl) {
    std::vector<ScanRecord> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= jsonl.size()) {
        auto end = jsonl.find('\n', start);
        if (end == std::string_view::npos) end = jsonl.size();
        std::string_view line = jsonl.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            if (end == jsonl.size()) break;
            continue;
        }
        auto fail = [&](const std::string& why) {
            return MalformedInput("scan record line " + std::to_string(line_no) + ": " + why);
        };
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw fail(e.what());
        }
        if (!doc.is_object()) throw fail("not an object");
        try {
            ScanRecord r;
            r.domain = doc.at("domain").get<std::string>();
            auto ts = parse_timestamp(doc.at("scanned_at").get<std::string>());
            if (!ts) throw fail("bad scanned_at");
            r.scanned_at = *ts;
            for (const auto& p : doc.value("login_pages", json::array())) r.login_pages.push_back(p.get<std::string>());
            for (const auto& i : doc.value("idps", json::array())) {
                IdpObservation o;
                o.idp = i.at("idp").get<std::string>();
                auto m = detection_method_from_string(i.value("method", "keyword"));
                if (!m) throw fail("unknown detection method");
                o.method = *m;
                o.login_page = i.value("login_page", "");
                bool dup = std::any_of(r.idps.begin(), r.idps.end(), [&](const IdpObservation& x) {
                    return x.idp == o.idp && x.login_page == o.login_page;
                });
                if (!dup) r.idps.push_back(std::move(o));
            }
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw fail(e.what());
        }
        if (end == jsonl.size()) break;
    }
    return out;
}

std::string write_scan_records(const std::vector<ScanRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        ordered_json idps = ordered_json::array();
        for (const auto& o : r.idps)
            idps.push_back({{"idp", o.idp}, {"method", to_string(o.method)}, {"login_page", o.login_page}});
        ordered_json doc = {{"domain", r.domain},
                            {"scanned_at", format_timestamp(r.scanned_at)},
                            {"login_pages", r.login_pages},
                            {"idps", idps}};
        out += doc.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
    }
    return out;
}

namespace {

std::map<std::string, const ScanRecord*> latest_by_domain(const std::vector<ScanRecord>& records) {
    std::map<std::string, const ScanRecord*> out;
    for (const auto& r : records) {
        auto& slot = out[r.domain];
        if (!slot || slot->scanned_at <= r.scanned_at) slot = &r;
    }
    return out;
}

std::set<std::pair<std::string, std::string>> pairs_of(const std::map<std::string, const ScanRecord*>& records) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& [domain, r] : records)
        for (const auto& o : r->idps) out.emplace(domain, o.idp);
    return out;
}

std::string md_row(const std::vector<std::string>& cells) {
    std::string out = "|";
    for (const auto& c : cells) out += " " + c + " |";
    return out + "\n";
}

} // namespace

LandscapeDiff diff_scans(const std::vector<ScanRecord>& prev, const std::vector<ScanRecord>& next) {
    auto p = pairs_of(latest_by_domain(prev));
    auto n = pairs_of(latest_by_domain(next));
    LandscapeDiff d;
    std::set_difference(n.begin(), n.end(), p.begin(), p.end(), std::back_inserter(d.added));
    std::set_difference(p.begin(), p.end(), n.begin(), n.end(), std::back_inserter(d.removed));
    std::set<std::string> with_p, with_n;
    for (const auto& [domain, idp] : p) with_p.insert(domain);
    for (const auto& [domain, idp] : n) with_n.insert(domain);
    std::set_difference(with_n.begin(), with_n.end(), with_p.begin(), with_p.end(),
                        std::inserter(d.websites_added, d.websites_added.end()));
    std::set_difference(with_p.begin(), with_p.end(), with_n.begin(), with_n.end(),
                        std::inserter(d.websites_removed, d.websites_removed.end()));
    return d;
}

std::string diff_to_json(const LandscapeDiff& diff) {
    auto pairs = [](const std::vector<std::pair<std::string, std::string>>& v) {
        ordered_json arr = ordered_json::array();
        for (const auto& [domain, idp] : v) arr.push_back({{"domain", domain}, {"idp", idp}});
        return arr;
    };
    ordered_json doc = {{"added", pairs(diff.added)},
                        {"removed", pairs(diff.removed)},
                        {"websites_added", diff.websites_added},
                        {"websites_removed", diff.websites_removed}};
    return doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

std::string diff_to_markdown(const LandscapeDiff& diff) {
    std::map<std::string, std::pair<int, int>> per_idp;
    for (const auto& [domain, idp] : diff.added) ++per_idp[idp].first;
    for (const auto& [domain, idp] : diff.removed) ++per_idp[idp].second;
    std::vector<std::string> header{""}, rule{"---"}, added{"Added"}, removed{"Removed"};
    for (const auto& [idp, counts] : per_idp) {
        header.push_back(idp);
        rule.push_back("---:");
        added.push_back(std::to_string(counts.first));
        removed.push_back(std::to_string(counts.second));
    }
    header.push_back("Websites");
    rule.push_back("---:");
    added.push_back(std::to_string(diff.websites_added.size()));
    removed.push_back(std::to_string(diff.websites_removed.size()));
    return md_row(header) + md_row(rule) + md_row(added) + md_row(removed);
}

LandscapeTable aggregate_landscape(const std::vector<ScanRecord>& scans,
                                   const std::vector<LoginClassification>& classifications) {
    using Key = std::tuple<std::string, std::string, std::string>;  // domain, lower idp, page
    std::map<Key, std::string> observed;  // -> display idp name
    for (const auto& r : scans)
        for (const auto& o : r.idps) observed.emplace(Key{r.domain, lower(o.idp), o.login_page}, o.idp);

    std::map<Key, const LoginClassification*> classes;
    for (const auto& c : classifications) classes.emplace(Key{c.domain, lower(c.idp), c.login_page}, &c);

    std::map<std::string, LandscapeCounts> rows;
    std::map<std::string, std::string> display;
    std::set<Key> used;
    auto count = [&](const std::string& idp, const LoginClassification* c) {
        std::string k = lower(idp);
        display.emplace(k, idp);
        LandscapeCounts& row = rows[k];
        ++row.logins;
        if (!c) {
            ++row.broken;
            return;
        }
        ++(c->protocol == Protocol::oidc ? row.oidc : row.oauth2);
        switch (c->flow) {
        case Flow::code: ++row.code; break;
        case Flow::hybrid: ++row.hybrid; break;
        case Flow::implicit: ++row.implicit; break;
        case Flow::unknown: ++row.unknown; break;
        }
    };
    for (const auto& [key, idp] : observed) {
        const auto& [domain, lidp, page] = key;
        const LoginClassification* c = nullptr;
        if (auto it = classes.find(key); it != classes.end()) {
            c = it->second;
            used.insert(key);
        } else if (auto any = classes.find(Key{domain, lidp, ""}); any != classes.end()) {
            c = any->second;
            used.insert(any->first);
        }
        count(idp, c);
    }
    for (const auto& [key, c] : classes)
        if (!used.count(key)) count(c->idp, c);

    LandscapeTable table;
    for (const auto& [k, counts] : rows) {
        table.rows.push_back({display[k], counts});
        auto& t = table.totals;
        t.logins += counts.logins;
        t.broken += counts.broken;
        t.oauth2 += counts.oauth2;
        t.oidc += counts.oidc;
        t.code += counts.code;
        t.hybrid += counts.hybrid;
        t.implicit += counts.implicit;
        t.unknown += counts.unknown;
    }
    return table;
}

std::string landscape_to_markdown(const LandscapeTable& table) {
    auto cells = [](const std::string& name, const LandscapeCounts& c) {
        return md_row({name, std::to_string(c.logins), std::to_string(c.broken), std::to_string(c.oauth2),
                       std::to_string(c.oidc), std::to_string(c.code), std::to_string(c.hybrid),
                       std::to_string(c.implicit), std::to_string(c.unknown)});
    };
    std::string out = md_row({"IdP", "SSO Logins", "Broken", "OAuth", "OIDC", "Code", "Hybrid", "Implicit", "N/A"});
    out += md_row({"---", "---:", "---:", "---:", "---:", "---:", "---:", "---:", "---:"});
    for (const auto& r : table.rows) out += cells(r.idp, r.counts);
    out += cells("Total", table.totals);
    return out;
}

} // namespace ssoaudit
