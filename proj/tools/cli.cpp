#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssoaudit/analysis.hpp"
#include "ssoaudit/error.hpp"
#include "ssoaudit/landscape.hpp"
#include "ssoaudit/report.hpp"
#include "ssoaudit/security.hpp"
#include "ssoaudit/spar.hpp"

namespace fs = std::filesystem;

namespace ssoaudit::cli {

namespace {

struct Globals {
    std::string idp_registry;
    std::optional<double> entropy_bits;
    std::string format = "json";
    std::string out;
    std::string config;
    std::optional<unsigned> jobs;
};

AnalysisOptions build_options(const Globals& g) {
    AnalysisOptions opts;
    if (const char* env = std::getenv("SSO_AUDITOR_CONFIG"); env && *env) apply_config_file(env, opts);
    if (!g.config.empty()) apply_config_file(g.config, opts);
    if (!g.idp_registry.empty()) load_idp_registry(g.idp_registry, opts);
    if (g.entropy_bits) opts.rules.entropy_threshold_bits = *g.entropy_bits;
    if (g.jobs) opts.jobs = *g.jobs;
    opts.rules.validate();
    return opts;
}

void emit(const Globals& g, const std::string& text, std::ostream& out) {
    if (g.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(g.out, std::ios::binary);
    if (!f) throw Error("cannot write " + g.out);
    f << text;
    if (!f) throw Error("write failed: " + g.out);
}

int report_exit(const Report& r) {
    if (!r.errors.empty()) return kOperationalError;
    return has_vulnerability(r) ? kVulnerable : kOk;
}

std::vector<RankedList> read_result_lists(const std::string& text) {
    auto doc = nlohmann::json::parse(text);
    const auto& engines = doc.is_object() ? doc.at("engines") : doc;
    std::vector<RankedList> lists;
    for (const auto& e : engines) lists.push_back({e.at("engine").get<std::string>(), e.at("urls").get<std::vector<std::string>>()});
    return lists;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Offline auditor for recorded OAuth 2.0 / OpenID Connect logins", "sso-auditor"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    Globals g;
    app.add_option("--idp-registry", g.idp_registry, "IdP registry JSON replacing the built-in one");
    app.add_option("--entropy-bits", g.entropy_bits, "CSRF entropy threshold in bits (default 96)");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "markdown"}));
    app.add_option("--out", g.out, "Write output to this file instead of stdout");
    app.add_option("--config", g.config, "Config file (also read from SSO_AUDITOR_CONFIG)");
    app.add_option("--jobs", g.jobs, "Worker threads for directory analysis")->check(CLI::Range(1u, 1024u));

    std::string trace_dir;
    auto* analyze = app.add_subcommand("analyze", "Security analysis of <domain>/<idp>/run{1,2} traces");
    analyze->add_option("trace-dir", trace_dir)->required()->check(CLI::ExistingDirectory);

    auto* privacy = app.add_subcommand("privacy", "Login attempt and token exchange leaks in visit traces");
    privacy->add_option("trace-dir", trace_dir)->required()->check(CLI::ExistingDirectory);

    std::string spar_value;
    int spar_depth = spar::Limits{}.max_depth;
    std::size_t spar_nodes = spar::Limits{}.max_nodes;
    auto* spar_cmd = app.add_subcommand("spar", "Print the recursive decode tree of a value");
    spar_cmd->add_option("value", spar_value)->required();
    spar_cmd->add_option("--max-depth", spar_depth)->check(CLI::PositiveNumber);
    spar_cmd->add_option("--max-nodes", spar_nodes)->check(CLI::PositiveNumber);

    auto* landscape = app.add_subcommand("landscape", "Search queries, candidate pages and scan diffs");
    landscape->require_subcommand(1);
    std::string prev_file, next_file, domain, input_file, keywords_file, report_file;
    int top_k = 3;
    auto* diff = landscape->add_subcommand("diff", "Difference between two scan histories (JSON Lines)");
    diff->add_option("prev", prev_file)->required()->check(CLI::ExistingFile);
    diff->add_option("next", next_file)->required()->check(CLI::ExistingFile);
    auto* queries = landscape->add_subcommand("queries", "Search-engine queries for a domain");
    queries->add_option("domain", domain)->required();
    auto* candidates = landscape->add_subcommand("candidates", "SSO buttons in a saved HTML page");
    candidates->add_option("html", input_file)->required()->check(CLI::ExistingFile);
    candidates->add_option("--keywords", keywords_file, "Keyword config JSON")->check(CLI::ExistingFile);
    auto* pool = landscape->add_subcommand("pool", "Pool ranked search results into candidate login pages");
    pool->add_option("results", input_file, "JSON list of {engine, urls}")->required()->check(CLI::ExistingFile);
    pool->add_option("--domain", domain)->required();
    pool->add_option("--top-k", top_k)->check(CLI::PositiveNumber);
    auto* table = landscape->add_subcommand("table", "Landscape table from a scan history and a security report");
    table->add_option("scans", input_file)->required()->check(CLI::ExistingFile);
    table->add_option("--report", report_file, "Security report JSON supplying classifications")
        ->check(CLI::ExistingFile);

    auto* report_cmd = app.add_subcommand("report", "Report utilities");
    report_cmd->require_subcommand(1);
    auto* render = report_cmd->add_subcommand("render", "Render a saved JSON report");
    render->add_option("report", report_file)->required()->check(CLI::ExistingFile);

    auto* rules = app.add_subcommand("rules", "Print the rule catalog");

    std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(argv_tail.begin(), argv_tail.end());
    try {
        app.parse(argv_tail);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion& e) {
        out << kToolVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kOperationalError;
    }

    try {
        if (analyze->parsed()) {
            Report r = analyze_security(trace_dir, build_options(g));
            emit(g, render_report(r, g.format), out);
            for (const auto& e : r.errors) err << "error: " << e.unit << ": " << e.message << "\n";
            return report_exit(r);
        }
        if (privacy->parsed()) {
            Report r = analyze_privacy(trace_dir, build_options(g));
            emit(g, render_report(r, g.format), out);
            for (const auto& e : r.errors) err << "error: " << e.unit << ": " << e.message << "\n";
            return report_exit(r);
        }
        if (spar_cmd->parsed()) {
            spar::Limits limits{spar_depth, spar_nodes};
            emit(g, spar::to_json(spar::decode(spar_value, limits), 2) + "\n", out);
            return kOk;
        }
        if (diff->parsed()) {
            auto d = diff_scans(read_scan_records(read_file(prev_file)), read_scan_records(read_file(next_file)));
            emit(g, g.format == "markdown" ? diff_to_markdown(d) : diff_to_json(d), out);
            return kOk;
        }
        if (queries->parsed()) {
            std::string text;
            for (const auto& q : build_search_queries(domain)) text += q + "\n";
            emit(g, text, out);
            return kOk;
        }
        if (candidates->parsed()) {
            KeywordConfig kw = keywords_file.empty() ? KeywordConfig::defaults()
                                                     : KeywordConfig::from_json(read_file(keywords_file));
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (const auto& c : extract_sso_candidates(read_file(input_file), kw)) {
                arr.push_back({{"position", c.position},
                               {"element", c.element_kind},
                               {"idp", c.idp},
                               {"match", c.match == MatchKind::phrase ? "phrase" : "idp-name"},
                               {"keyword", c.matched_keyword},
                               {"text", c.text}});
            }
            emit(g, arr.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n", out);
            return kOk;
        }
        if (pool->parsed()) {
            std::vector<RankedList> lists;
            try {
                lists = read_result_lists(read_file(input_file));
            } catch (const nlohmann::json::exception& e) {
                throw MalformedInput(input_file + ": " + e.what());
            }
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (const auto& p : pool_results(lists, top_k, domain))
                arr.push_back({{"url", p.url}, {"best_rank", p.best_rank}, {"engine", p.engine}});
            emit(g, arr.dump(2) + "\n", out);
            return kOk;
        }
        if (table->parsed()) {
            std::vector<LoginClassification> classes;
            if (!report_file.empty()) {
                Report r = report_from_json(read_file(report_file));
                for (const auto& u : r.units)
                    for (const auto& l : u.logins)
                        classes.push_back({u.domain, u.idp, "", l.protocol, l.returned_flow.value_or(l.requested_flow)});
            }
            auto t = aggregate_landscape(read_scan_records(read_file(input_file)), classes);
            if (g.format == "markdown") {
                emit(g, landscape_to_markdown(t), out);
            } else {
                Report r;
                r.landscape = t;
                auto doc = nlohmann::json::parse(report_to_json(r));
                emit(g, doc.at("landscape").dump(2) + "\n", out);
            }
            return kOk;
        }
        if (render->parsed()) {
            Report r = report_from_json(read_file(report_file));
            emit(g, render_report(r, g.format), out);
            return has_vulnerability(r) ? kVulnerable : kOk;
        }
        if (rules->parsed()) {
            emit(g, rule_catalog_json(), out);
            return kOk;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kOperationalError;
    }
    err << app.help();
    return kOperationalError;
}

} // namespace ssoaudit::cli
