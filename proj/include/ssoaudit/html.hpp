#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Error-tolerant HTML reading, just enough to find clickable elements and
// their text. Nothing here ever fails: broken markup is read as far as it
// makes sense and the rest becomes text.
namespace ssoaudit::html {

struct Node {
    enum class Type { element, text };
    Type type = Type::element;
    std::string tag;  // lowercase; empty for the document root and text nodes
    std::vector<std::pair<std::string, std::string>> attributes;  // names lowercase, values entity-decoded
    std::string text;
    std::vector<Node> children;
    std::size_t position = 0;  // element ordinal in document order, root is 0

    const std::string* attr(std::string_view name) const;
    // Concatenated text of all descendants, whitespace collapsed.
    std::string inner_text() const;
};

Node parse(std::string_view document);

std::string decode_entities(std::string_view text);

// Lowercase and collapse runs of whitespace into single spaces, trimmed.
std::string normalize_text(std::string_view text);

} // namespace ssoaudit::html
