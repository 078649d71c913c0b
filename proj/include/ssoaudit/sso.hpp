#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ssoaudit/idp_registry.hpp"
#include "ssoaudit/spar.hpp"
#include "ssoaudit/trace.hpp"

namespace ssoaudit {

// Where in a trace something was observed.
struct MessageSource {
    enum class Kind { entry, ibc };
    Kind kind = Kind::entry;
    std::size_t index = 0;

    static MessageSource entry(std::size_t i) { return {Kind::entry, i}; }
    static MessageSource ibc(std::size_t i) { return {Kind::ibc, i}; }

    auto operator<=>(const MessageSource&) const = default;
};

std::string to_string(const MessageSource& source);  // "entry:3", "ibc:0"

enum class MessageKind { login_request, login_response, token_request, token_response };
enum class Channel { http_query, http_fragment, http_body, post_message };
enum class Protocol { oauth2, oidc };
enum class Flow { code, implicit, hybrid, unknown };

std::string_view to_string(MessageKind k);
std::string_view to_string(Channel c);
std::string_view to_string(Protocol p);
std::string_view to_string(Flow f);

struct SsoParams {
    std::optional<std::string> client_id;
    std::optional<std::string> redirect_uri;
    std::optional<std::string> response_type;
    std::optional<std::string> response_mode;
    std::optional<std::string> scope;
    std::optional<std::string> state;
    std::optional<std::string> nonce;
    std::optional<std::string> code_challenge;
    std::optional<std::string> code_challenge_method;
    std::optional<std::string> code;
    std::optional<std::string> access_token;
    std::optional<std::string> token_type;
    std::optional<std::string> id_token;
    std::optional<std::string> client_secret;
    std::optional<std::string> at_hash;  // from the id_token payload

    bool has_tokens() const { return code || access_token || id_token; }
};

// (name, member) table of every extracted parameter except at_hash.
const std::vector<std::pair<std::string_view, std::optional<std::string> SsoParams::*>>& sso_param_fields();

struct SsoMessage {
    MessageKind kind = MessageKind::login_request;
    MessageSource source;
    Channel channel = Channel::http_query;
    std::string idp;
    std::string url;  // destination: IdP endpoint, delivery URL or target origin
    Timestamp at;
    SsoParams params;
};

// SPAR trees of everything the classifier looks at, built once per trace.
class DecodedTrace {
public:
    explicit DecodedTrace(const Trace& trace, const spar::Limits& limits = {});

    const Trace& trace() const { return *trace_; }
    const spar::Limits& limits() const { return limits_; }
    const spar::Node& url_tree(std::size_t entry) const { return urls_.at(entry); }
    const spar::Node* body_tree(std::size_t entry) const;
    const spar::Node* location_tree(std::size_t entry) const;
    const spar::Node& ibc_tree(std::size_t event) const { return ibc_.at(event); }
    Timestamp time_of(const MessageSource& source) const;

private:
    const Trace* trace_;
    spar::Limits limits_;
    std::vector<spar::Node> urls_;
    std::vector<std::optional<spar::Node>> bodies_;
    std::vector<std::optional<spar::Node>> locations_;
    std::vector<spar::Node> ibc_;
};

// Shallowest node with the given key; preorder breaks ties.
const spar::Node* find_shallowest(const spar::Node& tree, std::string_view key);

// Reads every SsoParams field from the given trees, first tree wins.
SsoParams extract_params(const std::vector<const spar::Node*>& trees, const spar::Limits& limits = {});

// at_hash claim of a compact id_token, if it decodes.
std::optional<std::string> id_token_claim(std::string_view id_token, std::string_view claim,
                                          const spar::Limits& limits = {});

std::vector<SsoMessage> detect_login_requests(const DecodedTrace& trace, const IdpRegistry& registry);
std::vector<SsoMessage> detect_login_requests(const Trace& trace, const IdpRegistry& registry);

std::optional<SsoMessage> match_login_response(const DecodedTrace& trace, const SsoMessage& request,
                                               const IdpRegistry& registry = IdpRegistry::defaults());
std::optional<SsoMessage> match_login_response(const Trace& trace, const SsoMessage& request,
                                               const IdpRegistry& registry = IdpRegistry::defaults());

// Browser-visible requests to a registry token endpoint and their responses.
struct TokenExchange {
    SsoMessage request;
    std::optional<SsoMessage> response;
};
std::vector<TokenExchange> detect_token_exchanges(const DecodedTrace& trace, const IdpRegistry& registry);

Protocol classify_protocol(const SsoMessage& request, const std::optional<SsoMessage>& response);
Flow classify_requested_flow(const std::optional<std::string>& response_type);
Flow classify_returned_flow(const SsoMessage& response);

// Key used for pairing messages across the two recorded runs.
std::string pairing_key(const SsoMessage& message);

std::vector<std::pair<SsoMessage, std::optional<SsoMessage>>> pair_runs(const std::vector<SsoMessage>& run1,
                                                                         const std::vector<SsoMessage>& run2);

} // namespace ssoaudit
