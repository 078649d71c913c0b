#include "ssoaudit/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ssoaudit/error.hpp"
#include "ssoaudit/privacy.hpp"

namespace fs = std::filesystem;

namespace ssoaudit {

namespace {

using json = nlohmann::json;

bool has_har(const fs::path& dir) {
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec))
        if (e.is_regular_file() && e.path().extension() == ".har") return true;
    return false;
}

fs::path har_in(const fs::path& dir) {
    if (fs::is_regular_file(dir / "trace.har")) return dir / "trace.har";
    std::vector<fs::path> hars;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".har") hars.push_back(e.path());
    if (hars.size() != 1) throw MalformedInput(dir.string() + ": expected trace.har");
    return hars.front();
}

std::vector<fs::path> dirs_named(const fs::path& root, std::initializer_list<std::string_view> names) {
    std::vector<fs::path> out;
    auto wanted = [&](const fs::path& p) {
        const std::string n = p.filename().string();
        return std::find(names.begin(), names.end(), n) != names.end() && has_har(p);
    };
    if (fs::is_directory(root) && wanted(root)) out.push_back(root);
    std::error_code ec;
    for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::skip_permission_denied, ec);
         it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) break;
        if (it->is_directory() && wanted(it->path())) out.push_back(it->path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Runs fn(i) for i in [0, n) on up to jobs threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

void note_time(std::optional<Timestamp>& latest, Timestamp t) {
    if (!latest || *latest < t) latest = t;
}

} // namespace

std::string read_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void load_idp_registry(const fs::path& file, AnalysisOptions& options) {
    options.registry = IdpRegistry::from_json(read_file(file));
    options.registry_source = file.filename().string();
}

void apply_config_file(const fs::path& file, AnalysisOptions& options) {
    json doc;
    try {
        doc = json::parse(read_file(file));
    } catch (const json::exception& e) {
        throw MalformedInput(file.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw MalformedInput(file.string() + ": expected an object");
    try {
        if (doc.contains("entropy_threshold_bits"))
            options.rules.entropy_threshold_bits = doc["entropy_threshold_bits"].get<double>();
        if (doc.contains("treat_pkce_as_csrf_protection"))
            options.rules.treat_pkce_as_csrf_protection = doc["treat_pkce_as_csrf_protection"].get<bool>();
        if (doc.contains("max_spar_depth")) options.rules.limits.max_depth = doc["max_spar_depth"].get<int>();
        if (doc.contains("max_spar_nodes")) options.rules.limits.max_nodes = doc["max_spar_nodes"].get<std::size_t>();
        if (doc.contains("jobs")) options.jobs = doc["jobs"].get<unsigned>();
        if (doc.contains("idp_registry")) {
            fs::path reg = doc["idp_registry"].get<std::string>();
            if (reg.is_relative()) reg = file.parent_path() / reg;
            load_idp_registry(reg, options);
        }
    } catch (const json::exception& e) {
        throw MalformedInput(file.string() + ": " + e.what());
    }
}

Trace load_trace_dir(const fs::path& dir, const ParseOptions& options) {
    const std::string har = read_file(har_in(dir));
    const fs::path meta = dir / "meta.json";
    if (!fs::is_regular_file(meta)) throw MissingMetadataField("meta.json");
    const std::string metadata = read_file(meta);
    std::optional<std::string> ibc;
    if (fs::is_regular_file(dir / "ibc.json")) ibc = read_file(dir / "ibc.json");
    return parse_trace_bundle(har, metadata, ibc ? std::optional<std::string_view>(*ibc) : std::nullopt, options);
}

std::vector<SecurityUnit> find_security_units(const fs::path& root) {
    std::map<fs::path, SecurityUnit> units;
    for (const auto& run : dirs_named(root, {"run1", "run2"})) {
        SecurityUnit& u = units[run.parent_path()];
        u.dir = run.parent_path();
        (run.filename() == "run1" ? u.run1 : u.run2) = run;
    }
    std::vector<SecurityUnit> out;
    for (auto& [dir, u] : units) out.push_back(std::move(u));
    return out;
}

std::vector<fs::path> find_privacy_dirs(const fs::path& root) { return dirs_named(root, {"consent", "noconsent"}); }

Report analyze_security(const fs::path& root, const AnalysisOptions& options) {
    options.rules.validate();
    if (!fs::is_directory(root)) throw Error("not a directory: " + root.string());
    auto units = find_security_units(root);

    struct Slot {
        std::optional<SecurityResult> result;
        std::optional<UnitError> error;
        std::optional<Timestamp> latest;
    };
    std::vector<Slot> slots(units.size());
    parallel_for(units.size(), options.jobs, [&](std::size_t i) {
        const SecurityUnit& u = units[i];
        Slot& slot = slots[i];
        try {
            // A lone run2 still gets analyzed, with nothing to pair against.
            const fs::path& first = u.run1 ? *u.run1 : *u.run2;
            Trace t1 = load_trace_dir(first, options.parse);
            note_time(slot.latest, t1.metadata().captured_at);
            std::optional<Trace> t2;
            if (u.run1 && u.run2) {
                t2 = load_trace_dir(*u.run2, options.parse);
                note_time(slot.latest, t2->metadata().captured_at);
            }
            slot.result = run_all(t1, t2 ? &*t2 : nullptr, options.rules, options.registry);
        } catch (const std::exception& e) {
            slot.error = UnitError{fs::relative(u.dir, root).generic_string(), e.what()};
        }
    });

    Report report;
    report.config = snapshot(options.rules, options.registry_source);
    for (auto& s : slots) {
        if (s.result) report.units.push_back(std::move(*s.result));
        if (s.error) report.errors.push_back(std::move(*s.error));
        if (s.latest) note_time(report.generated_at, *s.latest);
    }
    sort_report(report);
    return report;
}

Report analyze_privacy(const fs::path& root, const AnalysisOptions& options) {
    options.rules.validate();
    if (!fs::is_directory(root)) throw Error("not a directory: " + root.string());
    auto dirs = find_privacy_dirs(root);

    struct Slot {
        std::vector<PrivacyFinding> findings;
        std::optional<UnitError> error;
        std::optional<Timestamp> latest;
    };
    std::vector<Slot> slots(dirs.size());
    parallel_for(dirs.size(), options.jobs, [&](std::size_t i) {
        Slot& slot = slots[i];
        try {
            Trace t = load_trace_dir(dirs[i], options.parse);
            note_time(slot.latest, t.metadata().captured_at);
            slot.findings = detect_lal(t, options.registry);
            auto tel = detect_tel(t, options.registry);
            slot.findings.insert(slot.findings.end(), tel.begin(), tel.end());
        } catch (const std::exception& e) {
            slot.error = UnitError{fs::relative(dirs[i], root).generic_string(), e.what()};
        }
    });

    Report report;
    report.config = snapshot(options.rules, options.registry_source);
    report.privacy.emplace();
    for (auto& s : slots) {
        report.privacy->insert(report.privacy->end(), s.findings.begin(), s.findings.end());
        if (s.error) report.errors.push_back(std::move(*s.error));
        if (s.latest) note_time(report.generated_at, *s.latest);
    }
    sort_report(report);
    return report;
}

} // namespace ssoaudit
