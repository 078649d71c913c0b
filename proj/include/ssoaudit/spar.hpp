#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ssoaudit/codec.hpp"

// Smart parameter recursive decoding. A value is parsed into a tree: every
// node records which decoding produced its children, and every child is
// decoded again until nothing structured is left or a budget runs out.
namespace ssoaudit::spar {

enum class Decoding { leaf, percent, www_form, query_string, json, jwt, base64, base64url, nested_url };

std::string_view to_string(Decoding d);

struct Child;

struct Node {
    std::string raw;
    Decoding decoding = Decoding::leaf;
    std::vector<Child> children;
    int depth = 0;

    bool is_leaf() const;
    // Child addressed by segment, or nullptr.
    const Node* child(std::string_view segment) const;
};

// segment is unique among siblings; key is the name as it appeared in the
// data (repeated form keys share a key but get "key#2", "key#3" segments).
struct Child {
    std::string segment;
    std::string key;
    Node node;
};

inline bool Node::is_leaf() const { return children.empty(); }

struct Limits {
    int max_depth = 8;
    std::size_t max_nodes = 10000;
};

using Path = std::vector<std::string>;

// JSON Pointer style rendering: "" for the root, "/query/next" otherwise.
std::string path_to_string(const Path& path);

// Never fails: values without recognizable structure become leaves, and the
// tree silently stops growing at the depth and node budgets.
Node decode(std::string_view value, const Limits& limits = {});

struct Match {
    Path path;
    const Node* node;
};

// Nodes whose key equals key (case-sensitive), depth-first preorder.
std::vector<Match> search(const Node& tree, std::string_view key);

// Preorder-first node with the given key, or nullptr.
const Node* find_first(const Node& tree, std::string_view key);

// Non-root nodes whose raw value is an absolute http(s) URL.
std::vector<std::pair<Path, std::string>> find_nested_urls(const Node& tree);

std::vector<std::pair<Path, std::string>> leaves(const Node& tree);

std::size_t node_count(const Node& tree);
int tree_depth(const Node& tree);

// {"raw": ..., "decoding": ..., "children": {segment: node}}, children in
// document order.
std::string to_json(const Node& tree, int indent = -1);

// Encoders the decoder understands, for building test inputs and fixtures.
namespace encode {
std::string percent(std::string_view value);
std::string form(const std::vector<codec::Pair>& pairs);
std::string json_object(const std::vector<codec::Pair>& members);
std::string json_array(const std::vector<std::string>& items);
std::string base64(std::string_view value);
std::string base64url(std::string_view value);
// Compact JWS: base64url(header).base64url(payload).signature
std::string jwt(std::string_view header_json, std::string_view payload, std::string_view signature);
} // namespace encode

} // namespace ssoaudit::spar
