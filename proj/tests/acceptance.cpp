// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any
// line failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "fixtures.hpp"
#include "generators.hpp"
#include "ssoaudit/error.hpp"
#include "ssoaudit/landscape.hpp"
#include "ssoaudit/privacy.hpp"
#include "ssoaudit/report.hpp"
#include "ssoaudit/security.hpp"
#include "ssoaudit/spar.hpp"
#include "ssoaudit/sso.hpp"

namespace fs = std::filesystem;
using namespace ssoaudit;
using namespace ssoaudit::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool ok = true;
    std::vector<std::string> notes;

    void fail(std::string why) {
        ok = false;
        if (notes.size() < 12) notes.push_back(std::move(why));
    }
    void note(std::string what) { notes.push_back(std::move(what)); }
};

int failures = 0;

void report(const std::string& name, const Outcome& o) {
    std::cout << (o.ok ? "PASS " : "FAIL ") << name << "\n";
    for (const auto& n : o.notes) std::cout << "     " << n << "\n";
    if (!o.ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("sso-acceptance-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

struct CliResult {
    int code;
    std::string out;
};

CliResult sso(std::vector<std::string> args) {
    args.insert(args.begin(), "sso-auditor");
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    return {code, out.str()};
}

Outcome one_hot_matrix() {
    Outcome o;
    auto t0 = Clock::now();
    auto pack = fixture_pack();
    if (pack.size() < 12) o.fail("only " + std::to_string(pack.size()) + " bundles");

    std::set<std::string> triggers;
    std::map<std::string, std::set<std::string>> fired_on;  // rule -> bundles
    int baseline_vulns = -1;
    for (const auto& b : pack) {
        Trace r1 = b.run1.build();
        Trace r2 = b.run2.build();
        auto res = run_all(r1, &r2, RuleConfig{});
        if (b.trigger) triggers.insert(*b.trigger);
        else {
            baseline_vulns = 0;
            for (const auto& f : res.findings) baseline_vulns += f.category == Category::vulnerability;
        }
        for (const auto& f : res.findings) fired_on[f.rule_id].insert(b.name);
    }
    double elapsed = seconds_since(t0);

    for (const auto& r : rule_catalog()) {
        if (r.category == Category::diagnostic) continue;
        std::string id(r.id);
        if (!triggers.count(id)) o.fail(id + ": no trigger fixture");
    }
    for (const auto& id : triggers) {
        const auto& on = fired_on[id];
        if (on != std::set<std::string>{id}) {
            std::string where;
            for (const auto& n : on) where += (where.empty() ? "" : ", ") + n;
            o.fail(id + " fired on {" + where + "}");
        }
    }
    if (baseline_vulns != 0) o.fail("baseline vulnerabilities: " + std::to_string(baseline_vulns));
    if (elapsed >= 5.0) o.fail("runtime " + std::to_string(elapsed) + " s");
    o.note(std::to_string(pack.size()) + " bundles, " + std::to_string(elapsed) + " s");
    return o;
}

Outcome spar_roundtrip() {
    Outcome o;
    SparGenerator gen(4242);
    int composites = 0;
    for (int i = 0; i < 1000; ++i) {
        auto g = gen.make(5);
        composites += g.composite;
        auto tree = spar::decode(g.encoded);
        std::vector<std::string> got;
        for (auto& [path, leaf] : spar::leaves(tree)) got.push_back(leaf);
        std::sort(got.begin(), got.end());
        auto want = g.leaves;
        std::sort(want.begin(), want.end());
        if (got != want) o.fail("structure " + std::to_string(i) + ": " + g.encoded.substr(0, 80));
        if (spar::tree_depth(tree) > 5 + 1) o.fail("structure " + std::to_string(i) + " deeper than 6");
    }
    o.note(std::to_string(composites) + "/1000 composite");

    std::string v = "{\"a\":\"b\"}";
    for (int i = 0; i < 50; ++i) v = spar::encode::percent(v);
    for (spar::Limits lim : {spar::Limits{}, spar::Limits{4, 50}, spar::Limits{60, 20}}) {
        try {
            auto tree = spar::decode(v, lim);
            if (spar::tree_depth(tree) > lim.max_depth) o.fail("depth budget exceeded");
            if (spar::node_count(tree) > lim.max_nodes) o.fail("node budget exceeded");
        } catch (const std::exception& e) {
            o.fail(std::string("adversarial input threw: ") + e.what());
        }
    }
    return o;
}

// Strings over one alphabet class. Each carries at least one character that
// only that class (and the ones above it) admits, so the class is what the
// generator intended. Strings the decoder reads as structure are drawn again.
Outcome entropy_oracle() {
    Outcome o;
    struct Cls {
        int size;
        std::string alphabet;
        std::string marker;
    };
    std::string digits = "0123456789";
    std::string hex = digits + "abcdef";
    std::string alnum = digits + "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    std::string b64u = alnum + "-_";
    std::string printable;
    for (char c = '!'; c <= '~'; ++c)
        if (std::string("=%&").find(c) == std::string::npos) printable += c;
    std::vector<Cls> classes = {{10, digits, digits},
                                {16, hex, "abcdef"},
                                {62, alnum, "ghijklmnopqrstuvwxyzGHIJKLMNOPQRSTUVWXYZ"},
                                {64, b64u, "-_"},
                                {94, printable, "!#$'()*+,./:;<>?@[\\]^`{|}~\""}};

    std::mt19937 rng(96);
    auto pick = [&](const std::string& s) { return s[std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng)]; };
    int redrawn = 0;
    for (int i = 0; i < 500; ++i) {
        const auto& c = classes[i % classes.size()];
        std::string s;
        for (;;) {
            int len = std::uniform_int_distribution<int>(1, 64)(rng);
            s.clear();
            for (int k = 0; k < len; ++k) s += pick(c.alphabet);
            s[std::uniform_int_distribution<int>(0, len - 1)(rng)] = pick(c.marker);
            if (spar::decode(s).is_leaf()) break;
            ++redrawn;
        }
        double want = static_cast<double>(s.size()) * std::log2(static_cast<double>(c.size));
        auto got = estimate_entropy(s, std::nullopt);
        if (alphabet_class_size(s) != c.size) o.fail("class of " + s + " is " + std::to_string(alphabet_class_size(s)));
        if (got.bits != want || got.basis != EntropyBasis::charset_length)
            o.fail(s + ": " + std::to_string(got.bits) + " != " + std::to_string(want));
        auto same = estimate_entropy(s, s);
        if (same.bits != 0.0 || same.basis != EntropyBasis::static_across_runs) o.fail("static pair " + s + " not 0");
    }
    o.note("500 strings, " + std::to_string(redrawn) + " redrawn as structured");

    // 8-digit state in a real login, flagged at the default threshold
    std::mt19937 lrng(8);
    LoginSpec spec;
    spec.slug = "eight-digit-state";
    spec.state = Csrf::digits8;
    spec.pkce = false;
    Trace r1 = build_login(spec, 1, lrng).build();
    Trace r2 = build_login(spec, 2, lrng).build();
    auto res = run_all(r1, &r2, RuleConfig{});
    if (res.logins.size() != 1) {
        o.fail("expected one login, got " + std::to_string(res.logins.size()));
    } else {
        double bits = res.logins[0].csrf_entropy.bits;
        if (std::abs(bits - 26.58) > 0.01) o.fail("8-digit state scored " + std::to_string(bits));
        o.note("8-digit state: " + std::to_string(bits) + " bits");
    }
    bool weak = std::any_of(res.findings.begin(), res.findings.end(),
                            [](const Finding& f) { return f.rule_id == "csrf.weak"; });
    if (!weak) o.fail("csrf.weak not raised at 96 bits");
    return o;
}

Outcome flow_matrix() {
    Outcome o;
    // Oracle: no code -> implicit when anything else is asked for; code
    // alone -> code; code with anything -> hybrid; nothing -> unknown.
    const char* names[] = {"code", "token", "id_token"};
    for (int mask = 0; mask < 8; ++mask) {
        std::string rt;
        for (int b = 0; b < 3; ++b)
            if (mask & (1 << b)) rt += (rt.empty() ? "" : " ") + std::string(names[b]);
        bool code = mask & 1;
        bool other = mask & 6;
        Flow want = !code && !other ? Flow::unknown : !code ? Flow::implicit : other ? Flow::hybrid : Flow::code;
        Flow got = classify_requested_flow(rt);
        if (got != want)
            o.fail("\"" + rt + "\" -> " + std::string(to_string(got)) + ", want " + std::string(to_string(want)));
        // order of the words does not matter
        std::vector<std::string> words;
        std::istringstream in(rt);
        for (std::string w; in >> w;) words.push_back(w);
        std::reverse(words.begin(), words.end());
        std::string rev;
        for (auto& w : words) rev += (rev.empty() ? "" : " ") + w;
        if (classify_requested_flow(rev) != want) o.fail("\"" + rev + "\" differs from \"" + rt + "\"");
    }
    if (classify_requested_flow(std::nullopt) != Flow::unknown) o.fail("missing response_type not unknown");
    return o;
}

Outcome query_fidelity() {
    Outcome o;
    const std::vector<std::string> want = {
        "reddit.com login site:reddit.com",
        "reddit login site:reddit.com",
        "log in reddit site:*.reddit.com",
        "reddit login signin signup register account site:reddit.com",
        "site:reddit.com (intitle:\"login\" OR intitle:\"log in\" OR intitle:\"signin\" OR intitle:\"sign in\")",
    };
    auto got = build_search_queries("reddit.com");
    if (got.size() != want.size()) o.fail("got " + std::to_string(got.size()) + " queries");
    for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i)
        if (got[i] != want[i]) o.fail("query " + std::to_string(i) + ": " + got[i]);
    return o;
}

Outcome diff_oracle() {
    Outcome o;
    using Pair = std::pair<std::string, std::string>;
    const char* idps[] = {"Google", "Facebook", "Apple"};
    std::mt19937 rng(200);
    auto scans = [&]() {
        std::vector<ScanRecord> out;
        for (int d = 0; d < 200; ++d) {
            if (rng() % 6 == 0) continue;  // site not scanned
            ScanRecord r;
            r.domain = "site" + std::to_string(d) + ".example";
            r.scanned_at = *parse_timestamp("2024-06-01T00:00:00Z");
            std::string page = "https://" + r.domain + "/login";
            r.login_pages = {page};
            for (const char* i : idps)
                if (rng() % 2) r.idps.push_back({i, DetectionMethod::keyword, page});
            out.push_back(std::move(r));
        }
        return out;
    };
    auto pairs = [](const std::vector<ScanRecord>& rs) {
        std::set<Pair> s;
        for (const auto& r : rs)
            for (const auto& i : r.idps) s.insert({r.domain, i.idp});
        return s;
    };
    auto domains = [](const std::set<Pair>& ps) {
        std::set<std::string> s;
        for (const auto& p : ps) s.insert(p.first);
        return s;
    };
    for (int round = 0; round < 50; ++round) {
        auto a = scans(), b = scans();
        auto pa = pairs(a), pb = pairs(b);
        std::vector<Pair> added, removed;
        std::set_difference(pb.begin(), pb.end(), pa.begin(), pa.end(), std::back_inserter(added));
        std::set_difference(pa.begin(), pa.end(), pb.begin(), pb.end(), std::back_inserter(removed));
        auto da = domains(pa), db = domains(pb);
        std::set<std::string> wa, wr;
        std::set_difference(db.begin(), db.end(), da.begin(), da.end(), std::inserter(wa, wa.end()));
        std::set_difference(da.begin(), da.end(), db.begin(), db.end(), std::inserter(wr, wr.end()));

        auto fwd = diff_scans(a, b);
        auto back = diff_scans(b, a);
        std::string r = "round " + std::to_string(round) + ": ";
        if (fwd.added != added || fwd.removed != removed) o.fail(r + "pair sets differ from oracle");
        if (fwd.websites_added != wa || fwd.websites_removed != wr) o.fail(r + "website sets differ from oracle");
        if (back.added != fwd.removed || back.removed != fwd.added || back.websites_added != fwd.websites_removed ||
            back.websites_removed != fwd.websites_added)
            o.fail(r + "not symmetric");
    }
    return o;
}

Outcome privacy_gating() {
    Outcome o;
    int noconsent_lal = 0, noconsent_tel = 0;
    std::set<std::string> consent_lal, consent_tel, consent_names;
    for (const auto& f : privacy_pack()) {
        Trace t = f.trace.build();
        auto lal = detect_lal(t);
        auto tel = detect_tel(t);
        if (f.profile == ProfileKind::no_consent_visit) {
            noconsent_lal += static_cast<int>(lal.size());
            noconsent_tel += static_cast<int>(tel.size());
        } else {
            consent_names.insert(f.name);
            if (!lal.empty()) consent_lal.insert(f.name);
            if (!tel.empty()) consent_tel.insert(f.name);
            if (f.expect_tel != !tel.empty()) o.fail(f.name + ": TEL presence differs from fixture");
        }
    }
    if (noconsent_tel != 0) o.fail("no-consent TEL count " + std::to_string(noconsent_tel));
    if (noconsent_lal == 0) o.fail("no LAL under no-consent");
    if (consent_lal != consent_names) o.fail("consent fixture without LAL");
    if (consent_tel.empty()) o.fail("no TEL under consent");
    o.note("no-consent LAL " + std::to_string(noconsent_lal) + ", consent LAL " + std::to_string(consent_lal.size()) +
           " TEL " + std::to_string(consent_tel.size()));

    int refused = 0, total = 0;
    for (const auto& b : fixture_pack()) {
        for (const auto* tb : {&b.run1, &b.run2}) {
            Trace t = tb->build();
            total += 2;
            try {
                detect_lal(t);
            } catch (const ProfileMismatch&) {
                ++refused;
            }
            try {
                detect_tel(t);
            } catch (const ProfileMismatch&) {
                ++refused;
            }
        }
    }
    if (refused != total) o.fail("login runs accepted: " + std::to_string(total - refused));
    return o;
}

Outcome determinism() {
    Outcome o;
    TempDir dir;
    write_fixture_pack(dir.path);
    auto a = sso({"analyze", dir.path.string()});
    auto b = sso({"analyze", dir.path.string()});
    if (a.out != b.out) o.fail("two runs differ");
    if (a.out.empty()) o.fail("no output");
    try {
        auto rep = report_from_json(a.out);
        if (report_to_json(rep) != a.out) o.fail("output is not canonical");
        if ((a.code == 2) != has_vulnerability(rep)) o.fail("exit " + std::to_string(a.code) + " on the whole pack");
    } catch (const std::exception& e) {
        o.fail(std::string("unreadable report: ") + e.what());
    }
    int vulnerable = 0, clean = 0;
    for (const auto& entry : fs::directory_iterator(dir.path)) {
        auto r = sso({"analyze", entry.path().string()});
        try {
            bool vuln = has_vulnerability(report_from_json(r.out));
            if (r.code != (vuln ? 2 : 0))
                o.fail(entry.path().filename().string() + ": exit " + std::to_string(r.code));
            (vuln ? vulnerable : clean)++;
        } catch (const std::exception& e) {
            o.fail(entry.path().filename().string() + ": " + e.what());
        }
    }
    o.note(std::to_string(vulnerable) + " bundles exit 2, " + std::to_string(clean) + " exit 0");
    return o;
}

Outcome throughput() {
    Outcome o;
    std::mt19937 rng(1000);
    LoginSpec spec;
    spec.slug = "big-har";
    auto builder = build_login(spec, 1, rng);
    std::string filler;
    while (filler.size() < 10600) filler += "lorem ipsum dolor sit amet " + random_hex(rng, 16) + "\n";
    for (std::size_t i = 0; builder.size() < 1000; ++i) {
        builder.step(3).add({.url = "https://cdn.big-har.test/asset/" + std::to_string(i) + ".js?v=" + random_hex(rng, 8),
                             .resource_type = "script",
                             .response_body = filler,
                             .response_mime = "application/javascript"});
    }
    std::string har = builder.har_json();
    std::string meta = builder.meta_json();
    auto ibc = builder.ibc_json();

    auto t0 = Clock::now();
    Trace t = parse_trace_bundle(har, meta, ibc ? std::optional<std::string_view>(*ibc) : std::nullopt);
    auto res = run_all(t, nullptr, RuleConfig{});
    double elapsed = seconds_since(t0);

    if (har.size() < 10u * 1024 * 1024) o.fail("HAR only " + std::to_string(har.size()) + " bytes");
    if (t.entries().size() != 1000) o.fail(std::to_string(t.entries().size()) + " entries");
    if (res.logins.size() != 1) o.fail("login not found in the large trace");
    if (elapsed >= 2.0) o.fail("took " + std::to_string(elapsed) + " s");
    o.note(std::to_string(har.size() / 1024) + " KiB, " + std::to_string(t.entries().size()) + " entries, " +
           std::to_string(elapsed) + " s");
    return o;
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*run)();
    };
    const Criterion criteria[] = {
        {"rule one-hot matrix", one_hot_matrix},
        {"SPAR roundtrip", spar_roundtrip},
        {"entropy oracle", entropy_oracle},
        {"flow classification matrix", flow_matrix},
        {"search query fidelity", query_fidelity},
        {"diff oracle", diff_oracle},
        {"privacy gating", privacy_gating},
        {"determinism", determinism},
        {"throughput", throughput},
    };
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        report(c.name, o);
    }
    std::cout << (failures ? std::to_string(failures) + " criteria failed\n" : "all criteria passed\n");
    return failures ? 1 : 0;
}
