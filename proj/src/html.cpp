#include "ssoaudit/html.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>

namespace ssoaudit::html {

namespace {

constexpr std::string_view kVoid[] = {"area", "base", "br", "col", "embed", "hr", "img", "input",
                                      "link", "meta", "param", "source", "track", "wbr"};
constexpr std::string_view kRawText[] = {"script", "style", "textarea", "title"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool istarts_with(std::string_view s, std::size_t at, std::string_view prefix) {
    if (s.size() - at < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[at + i])) != prefix[i]) return false;
    return true;
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

class Parser {
public:
    explicit Parser(std::string_view doc) : s_(doc) {}

    Node run() {
        Node root;
        stack_.push_back(&root);
        while (i_ < s_.size()) {
            if (s_[i_] == '<') {
                if (s_.compare(i_, 4, "<!--") == 0) {
                    auto end = s_.find("-->", i_ + 4);
                    i_ = end == std::string_view::npos ? s_.size() : end + 3;
                } else if (i_ + 1 < s_.size() && (s_[i_ + 1] == '!' || s_[i_ + 1] == '?')) {
                    skip_past('>');
                } else if (i_ + 1 < s_.size() && s_[i_ + 1] == '/') {
                    close_tag();
                } else if (i_ + 1 < s_.size() && std::isalpha(static_cast<unsigned char>(s_[i_ + 1]))) {
                    open_tag();
                } else {
                    text_until_tag();
                }
            } else {
                text_until_tag();
            }
        }
        return root;
    }

private:
    void skip_past(char c) {
        auto end = s_.find(c, i_);
        i_ = end == std::string_view::npos ? s_.size() : end + 1;
    }

    void add_text(std::string_view raw) {
        if (raw.empty()) return;
        Node t;
        t.type = Node::Type::text;
        t.text = decode_entities(raw);
        stack_.back()->children.push_back(std::move(t));
    }

    void text_until_tag() {
        auto end = s_.find('<', i_ + 1);
        if (end == std::string_view::npos) end = s_.size();
        add_text(s_.substr(i_, end - i_));
        i_ = end;
    }

    std::string read_name() {
        std::size_t start = i_;
        while (i_ < s_.size() && !is_space(s_[i_]) && s_[i_] != '>' && s_[i_] != '/' && s_[i_] != '=') ++i_;
        return lower(s_.substr(start, i_ - start));
    }

    void skip_spaces() {
        while (i_ < s_.size() && is_space(s_[i_])) ++i_;
    }

    void close_tag() {
        i_ += 2;
        std::string name = read_name();
        skip_past('>');
        for (std::size_t k = stack_.size(); k-- > 1;) {
            if (stack_[k]->tag == name) {
                stack_.resize(k);
                return;
            }
        }
    }

    void open_tag() {
        ++i_;
        Node el;
        el.tag = read_name();
        el.position = ++ordinal_;
        bool self_closing = false;
        while (i_ < s_.size()) {
            skip_spaces();
            if (i_ >= s_.size()) break;
            if (s_[i_] == '>') {
                ++i_;
                break;
            }
            if (s_[i_] == '/') {
                self_closing = true;
                ++i_;
                continue;
            }
            std::string name = read_name();
            if (name.empty()) {
                ++i_;
                continue;
            }
            skip_spaces();
            std::string value;
            if (i_ < s_.size() && s_[i_] == '=') {
                ++i_;
                skip_spaces();
                if (i_ < s_.size() && (s_[i_] == '"' || s_[i_] == '\'')) {
                    char q = s_[i_++];
                    auto end = s_.find(q, i_);
                    if (end == std::string_view::npos) end = s_.size();
                    value = decode_entities(s_.substr(i_, end - i_));
                    i_ = std::min(s_.size(), end + 1);
                } else {
                    std::size_t start = i_;
                    while (i_ < s_.size() && !is_space(s_[i_]) && s_[i_] != '>') ++i_;
                    value = decode_entities(s_.substr(start, i_ - start));
                }
            }
            self_closing = false;
            bool dup = std::any_of(el.attributes.begin(), el.attributes.end(),
                                   [&](const auto& a) { return a.first == name; });
            if (!dup) el.attributes.emplace_back(std::move(name), std::move(value));
        }

        const std::string tag = el.tag;
        const bool is_void = std::find(std::begin(kVoid), std::end(kVoid), tag) != std::end(kVoid);
        const bool raw = std::find(std::begin(kRawText), std::end(kRawText), tag) != std::end(kRawText);
        Node* parent = stack_.back();
        parent->children.push_back(std::move(el));
        if (is_void || self_closing) return;
        Node* pushed = &parent->children.back();
        if (raw) {
            std::string close = "</" + tag;
            std::size_t end = i_;
            while (end < s_.size() && !istarts_with(s_, end, close)) ++end;
            if (tag == "textarea" || tag == "title") {
                Node t;
                t.type = Node::Type::text;
                t.text = decode_entities(s_.substr(i_, end - i_));
                pushed->children.push_back(std::move(t));
            }
            i_ = end;
            if (i_ < s_.size()) skip_past('>');
            return;
        }
        stack_.push_back(pushed);
    }

    std::string_view s_;
    std::size_t i_ = 0;
    std::size_t ordinal_ = 0;
    // Children vectors only grow at the back of the innermost open element,
    // so pointers held here stay valid.
    std::vector<Node*> stack_;
};

void collect_text(const Node& n, std::string& out) {
    if (n.type == Node::Type::text) {
        out += n.text;
        out += ' ';
        return;
    }
    for (const auto& c : n.children) collect_text(c, out);
}

} // namespace

const std::string* Node::attr(std::string_view name) const {
    for (const auto& [k, v] : attributes)
        if (k == name) return &v;
    return nullptr;
}

std::string Node::inner_text() const {
    std::string raw;
    collect_text(*this, raw);
    std::string out;
    bool space = false;
    for (char c : raw) {
        if (is_space(c)) {
            space = !out.empty();
        } else {
            if (space) out += ' ';
            space = false;
            out += c;
        }
    }
    return out;
}

Node parse(std::string_view document) { return Parser(document).run(); }

std::string decode_entities(std::string_view text) {
    static constexpr std::pair<std::string_view, std::string_view> kNamed[] = {
        {"amp", "&"}, {"lt", "<"}, {"gt", ">"}, {"quot", "\""}, {"apos", "'"}, {"nbsp", " "},
    };
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '&') {
            out += text[i];
            continue;
        }
        auto semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 10) {
            out += '&';
            continue;
        }
        std::string_view name = text.substr(i + 1, semi - i - 1);
        bool done = false;
        if (name.size() > 1 && name[0] == '#') {
            bool hex = name[1] == 'x' || name[1] == 'X';
            std::string_view digits = name.substr(hex ? 2 : 1);
            std::uint32_t cp = 0;
            bool ok = !digits.empty();
            for (char c : digits) {
                int v = std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                        : hex && std::isxdigit(static_cast<unsigned char>(c))
                            ? std::tolower(static_cast<unsigned char>(c)) - 'a' + 10
                            : -1;
                if (v < 0 || cp > 0x10FFFF) {
                    ok = false;
                    break;
                }
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
            }
            if (ok) {
                append_utf8(out, cp);
                done = true;
            }
        } else {
            for (const auto& [n, v] : kNamed) {
                if (n == name) {
                    out += v;
                    done = true;
                    break;
                }
            }
        }
        if (done)
            i = semi;
        else
            out += '&';
    }
    return out;
}

std::string normalize_text(std::string_view text) {
    std::string out;
    bool space = false;
    for (char c : text) {
        if (is_space(c)) {
            space = !out.empty();
            continue;
        }
        if (space) out += ' ';
        space = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

} // namespace ssoaudit::html
