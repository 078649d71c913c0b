#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssoaudit/idp_registry.hpp"
#include "ssoaudit/report.hpp"
#include "ssoaudit/security.hpp"
#include "ssoaudit/trace.hpp"

namespace ssoaudit {

struct AnalysisOptions {
    RuleConfig rules;
    IdpRegistry registry = IdpRegistry::defaults();
    std::string registry_source = "builtin";
    unsigned jobs = 0;  // 0: one per hardware thread
    ParseOptions parse;
};

// Applies a JSON config document on top of options:
// {"entropy_threshold_bits", "treat_pkce_as_csrf_protection", "max_spar_depth",
//  "max_spar_nodes", "idp_registry" (path, relative to the config file), "jobs"}.
// Throws MalformedInput.
void apply_config_file(const std::filesystem::path& file, AnalysisOptions& options);
void load_idp_registry(const std::filesystem::path& file, AnalysisOptions& options);

std::string read_file(const std::filesystem::path& file);

// A directory holding trace.har (or the only *.har), meta.json and an
// optional ibc.json.
Trace load_trace_dir(const std::filesystem::path& dir, const ParseOptions& options = {});

struct SecurityUnit {
    std::filesystem::path dir;  // <domain>/<idp>
    std::optional<std::filesystem::path> run1;
    std::optional<std::filesystem::path> run2;
};

// run1/run2 directories below root (root itself included), grouped by
// parent, sorted by path.
std::vector<SecurityUnit> find_security_units(const std::filesystem::path& root);
// consent/noconsent directories below root, sorted.
std::vector<std::filesystem::path> find_privacy_dirs(const std::filesystem::path& root);

// Units are processed on a bounded worker pool; the report is sorted
// afterwards so the thread count never shows in the output. Failures of
// single units land in Report::errors. generated_at is the latest
// captured_at of the traces read.
Report analyze_security(const std::filesystem::path& root, const AnalysisOptions& options);
Report analyze_privacy(const std::filesystem::path& root, const AnalysisOptions& options);

} // namespace ssoaudit
