#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssoaudit/codec.hpp"
#include "ssoaudit/url.hpp"

namespace ssoaudit {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// ISO 8601 date-time. A missing zone designator means UTC.
std::optional<Timestamp> parse_timestamp(std::string_view text);
// Always "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string format_timestamp(Timestamp ts);

struct Header {
    std::string name;
    std::string value;

    bool operator==(const Header&) const = default;
};

// First header with the given name, compared case-insensitively.
const Header* find_header(const std::vector<Header>& headers, std::string_view name);

struct Body {
    std::string mime_type;
    std::string text;
    bool truncated = false;

    bool operator==(const Body&) const = default;
};

struct HttpRequest {
    std::string method;
    std::string url;
    Url parsed_url;
    std::vector<Header> headers;
    std::vector<codec::Pair> query;  // decoded from the URL
    std::optional<Body> body;
    std::string resource_type;  // "_resourceType" when the recorder wrote one
};

struct HttpResponse {
    int status = 0;  // 0: no response was received (blocked or aborted)
    std::vector<Header> headers;
    std::optional<std::string> redirect_target;  // absolute, resolved Location
    Body body;
};

struct HttpEntry {
    HttpRequest request;
    HttpResponse response;
    Timestamp started_at;
    std::optional<std::size_t> initiator;  // index of the entry that caused this one

    bool is_redirect() const { return response.redirect_target.has_value(); }
    // Top-level navigation as far as the recording tells.
    bool is_navigation() const;
};

enum class IbcKind { post_message, fragment_change };

struct IbcEvent {
    IbcKind kind = IbcKind::post_message;
    std::string source_origin;
    std::string target_origin;  // origin or "*"
    std::string payload;
    Timestamp at;
};

enum class ProfileKind { login_run, consent_given_visit, no_consent_visit };

std::string_view to_string(ProfileKind kind);
std::optional<ProfileKind> profile_kind_from_string(std::string_view text);
std::string_view to_string(IbcKind kind);

struct TraceMetadata {
    std::string domain;
    std::optional<std::string> idp_label;
    std::string page_url;
    Timestamp captured_at;
    ProfileKind profile_kind = ProfileKind::login_run;
    int run_index = 1;
    std::optional<std::string> annotation;  // free-form tag for manual review
};

// One recorded browser session. Entries are ordered by start time, ties kept
// in recording order; IBC events are ordered by time.
class Trace {
public:
    Trace() = default;
    Trace(TraceMetadata metadata, std::vector<HttpEntry> entries, std::vector<IbcEvent> ibc_events);

    const TraceMetadata& metadata() const { return metadata_; }
    const std::vector<HttpEntry>& entries() const { return entries_; }
    const std::vector<IbcEvent>& ibc_events() const { return ibc_events_; }
    const HttpEntry& entry(std::size_t i) const { return entries_.at(i); }
    std::size_t size() const { return entries_.size(); }

private:
    TraceMetadata metadata_;
    std::vector<HttpEntry> entries_;
    std::vector<IbcEvent> ibc_events_;
};

struct ParseOptions {
    std::size_t max_body_bytes = 5 * 1024 * 1024;
};

// HAR 1.2. IBC events may ride along in log._ibc. Metadata defaults to a
// login run of the first entry's site.
Trace parse_har(std::string_view bytes, const ParseOptions& options = {});

// HAR plus metadata document plus optional IBC sidecar array. Events in the
// sidecar are merged with any log._ibc events.
Trace parse_trace_bundle(std::string_view har, std::string_view metadata,
                         std::optional<std::string_view> ibc = std::nullopt,
                         const ParseOptions& options = {});

TraceMetadata parse_metadata(std::string_view bytes);
std::vector<IbcEvent> parse_ibc(std::string_view bytes);

// Serializers producing documents the parsers above accept.
std::string serialize_har(const Trace& trace);
std::string serialize_metadata(const TraceMetadata& metadata);
std::string serialize_ibc(const std::vector<IbcEvent>& events);

// Follows 3xx Location targets to later entries with the same URL (fragment
// ignored). The result starts with start and never revisits an entry.
std::vector<std::size_t> redirect_chain(const Trace& trace, std::size_t start);

} // namespace ssoaudit
