#include "tutorstack/kb/html_extract.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tutorstack/kb/text.hpp"

namespace tutorstack::kb {

namespace {

constexpr std::array kDropped = {"script", "style", "nav", "footer", "noscript", "template"};
constexpr std::array kRawText = {"script", "style", "textarea", "title"};
constexpr std::array kVoid = {"area", "base", "br", "col", "embed", "hr", "img", "input", "link",
                              "meta", "param", "source", "track", "wbr"};
constexpr std::array kBlock = {"address", "article", "aside", "blockquote", "body", "caption",
                               "dd", "details", "div", "dl", "dt", "fieldset", "figcaption",
                               "figure", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header",
                               "hr", "html", "li", "main", "ol", "p", "pre", "section", "summary",
                               "table", "tbody", "thead", "tfoot", "tr", "ul", "br", "video",
                               "audio"};
constexpr std::array kCaptionClasses = {"caption", "subtitle", "transcript"};

template <std::size_t N>
bool contains(const std::array<const char*, N>& set, std::string_view name) {
    return std::any_of(set.begin(), set.end(), [&](const char* s) { return name == s; });
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string collapse(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (const char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::optional<std::uint32_t> named_entity(std::string_view name) {
    static const std::pair<const char*, std::uint32_t> table[] = {
        {"amp", '&'},      {"lt", '<'},       {"gt", '>'},       {"quot", '"'},
        {"apos", '\''},    {"nbsp", 0xA0},    {"ndash", 0x2013}, {"mdash", 0x2014},
        {"hellip", 0x2026}, {"lsquo", 0x2018}, {"rsquo", 0x2019}, {"ldquo", 0x201C},
        {"rdquo", 0x201D}, {"copy", 0xA9},    {"reg", 0xAE},     {"times", 0xD7},
        {"divide", 0xF7},  {"le", 0x2264},    {"ge", 0x2265},    {"ne", 0x2260},
        {"minus", 0x2212}, {"middot", 0xB7},  {"deg", 0xB0},     {"plusmn", 0xB1},
        {"bull", 0x2022},  {"rarr", 0x2192},  {"larr", 0x2190},  {"sum", 0x2211},
        {"alpha", 0x3B1},  {"beta", 0x3B2},   {"lambda", 0x3BB}, {"sigma", 0x3C3},
        {"theta", 0x3B8},  {"pi", 0x3C0},     {"infin", 0x221E}, {"isin", 0x2208},
    };
    for (const auto& [n, cp] : table) {
        if (name == n) return cp;
    }
    return std::nullopt;
}

std::string decode_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out.push_back(s[i++]);
            continue;
        }
        const auto semi = s.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back(s[i++]);
            continue;
        }
        const auto body = s.substr(i + 1, semi - i - 1);
        std::optional<std::uint32_t> cp;
        if (body.size() > 1 && body[0] == '#') {
            const bool hex = body[1] == 'x' || body[1] == 'X';
            const auto digits = body.substr(hex ? 2 : 1);
            std::uint32_t v = 0;
            bool ok = !digits.empty();
            for (const char c : digits) {
                const int d = std::isdigit(static_cast<unsigned char>(c))
                                  ? c - '0'
                                  : (hex && std::isxdigit(static_cast<unsigned char>(c))
                                         ? std::tolower(static_cast<unsigned char>(c)) - 'a' + 10
                                         : -1);
                if (d < 0 || v > 0x10FFFF) {
                    ok = false;
                    break;
                }
                v = v * (hex ? 16 : 10) + static_cast<std::uint32_t>(d);
            }
            if (ok) cp = v;
        } else {
            cp = named_entity(body);
        }
        if (!cp) {
            out.push_back(s[i++]);
            continue;
        }
        // Non-breaking spaces collapse like ordinary whitespace.
        if (*cp == 0xA0) {
            out.push_back(' ');
        } else {
            append_utf8(out, *cp);
        }
        i = semi + 1;
    }
    return out;
}

struct Tag {
    std::string name;
    bool closing = false;
    bool self_closing = false;
    std::vector<std::pair<std::string, std::string>> attrs;

    std::string attr(std::string_view key) const {
        for (const auto& [k, v] : attrs) {
            if (k == key) return v;
        }
        return {};
    }
};

// Parses the tag starting at html[pos] == '<'. Returns the tag and the index
// past its '>' or nullopt when the '<' does not open a tag.
std::optional<std::pair<Tag, std::size_t>> parse_tag(std::string_view html, std::size_t pos) {
    std::size_t i = pos + 1;
    Tag tag;
    if (i < html.size() && html[i] == '/') {
        tag.closing = true;
        ++i;
    }
    if (i >= html.size() || !std::isalpha(static_cast<unsigned char>(html[i]))) return std::nullopt;
    const std::size_t name_start = i;
    while (i < html.size() && !is_space(html[i]) && html[i] != '>' && html[i] != '/') ++i;
    tag.name = lower(html.substr(name_start, i - name_start));
    while (i < html.size()) {
        while (i < html.size() && is_space(html[i])) ++i;
        if (i >= html.size()) break;
        if (html[i] == '>') return std::make_pair(std::move(tag), i + 1);
        if (html[i] == '/') {
            tag.self_closing = true;
            ++i;
            continue;
        }
        const std::size_t key_start = i;
        while (i < html.size() && !is_space(html[i]) && html[i] != '>' && html[i] != '=' &&
               html[i] != '/') {
            ++i;
        }
        std::string key = lower(html.substr(key_start, i - key_start));
        while (i < html.size() && is_space(html[i])) ++i;
        std::string value;
        if (i < html.size() && html[i] == '=') {
            ++i;
            while (i < html.size() && is_space(html[i])) ++i;
            if (i < html.size() && (html[i] == '"' || html[i] == '\'')) {
                const char quote = html[i++];
                const auto end = html.find(quote, i);
                if (end == std::string_view::npos) return std::nullopt;
                value = decode_entities(html.substr(i, end - i));
                i = end + 1;
            } else {
                const std::size_t v_start = i;
                while (i < html.size() && !is_space(html[i]) && html[i] != '>') ++i;
                value = decode_entities(html.substr(v_start, i - v_start));
            }
        }
        if (key.empty()) {
            ++i;
            continue;
        }
        tag.attrs.emplace_back(std::move(key), std::move(value));
    }
    return std::nullopt;
}

std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from) {
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        bool match = true;
        for (std::size_t k = 0; k < needle.size() && match; ++k) {
            match = std::tolower(static_cast<unsigned char>(hay[i + k])) == needle[k];
        }
        if (match) return i;
    }
    return std::string_view::npos;
}

bool caption_class(const Tag& tag) {
    const auto cls = lower(tag.attr("class"));
    return std::any_of(kCaptionClasses.begin(), kCaptionClasses.end(),
                       [&](const char* c) { return cls.find(c) != std::string::npos; });
}

int heading_level(std::string_view name) {
    if (name.size() == 2 && name[0] == 'h' && name[1] >= '1' && name[1] <= '6') return name[1] - '0';
    return 0;
}

class Extractor {
public:
    ExtractedPage run(std::string_view html, std::string_view base_url) {
        std::size_t i = 0;
        bool saw_tag = false;
        while (i < html.size()) {
            if (html[i] != '<') {
                const auto next = html.find('<', i);
                const auto end = next == std::string_view::npos ? html.size() : next;
                text(decode_entities(html.substr(i, end - i)));
                i = end;
                continue;
            }
            if (html.substr(i, 4) == "<!--") {
                const auto end = html.find("-->", i + 4);
                i = end == std::string_view::npos ? html.size() : end + 3;
                saw_tag = true;
                continue;
            }
            if (html.substr(i, 9) == "<![CDATA[") {
                const auto end = html.find("]]>", i + 9);
                const auto stop = end == std::string_view::npos ? html.size() : end;
                text(std::string(html.substr(i + 9, stop - i - 9)));
                i = end == std::string_view::npos ? html.size() : end + 3;
                continue;
            }
            if (i + 1 < html.size() && (html[i + 1] == '!' || html[i + 1] == '?')) {
                const auto end = html.find('>', i);
                i = end == std::string_view::npos ? html.size() : end + 1;
                saw_tag = true;
                continue;
            }
            auto parsed = parse_tag(html, i);
            if (!parsed) {
                text("<");
                ++i;
                continue;
            }
            saw_tag = true;
            auto& [tag, after] = *parsed;
            i = after;
            if (tag.closing) {
                close(tag.name);
                continue;
            }
            open(tag);
            if (contains(kRawText, tag.name) && !tag.self_closing) {
                const auto close_pos = find_ci(html, "</" + tag.name, i);
                const auto stop = close_pos == std::string_view::npos ? html.size() : close_pos;
                if (tag.name == "title" || tag.name == "textarea") {
                    text(decode_entities(html.substr(i, stop - i)));
                }
                i = stop;
            }
        }
        flush();
        if (!saw_tag) return {};

        ExtractedPage page;
        page.title = collapse(title_);
        if (page.title.empty()) page.title = collapse(first_h1_);
        if (page.title.empty() && !blocks_.empty()) page.title = std::string(base_url);
        for (std::size_t b = 0; b < blocks_.size(); ++b) {
            if (b > 0) page.text += "\n\n";
            page.text += blocks_[b];
        }
        return page;
    }

private:
    struct Open {
        std::string name;
        bool block = false;
        bool dropped = false;
    };

    bool dropping() const { return dropped_depth_ > 0; }

    void open(const Tag& tag) {
        const bool is_void = contains(kVoid, tag.name) || tag.self_closing;
        const bool block = contains(kBlock, tag.name) || caption_class(tag) ||
                           tag.name == "td" || tag.name == "th";
        if (block && !dropping()) flush();
        if (tag.name == "track" && !dropping()) {
            const auto label = collapse(tag.attr("label"));
            if (!label.empty()) {
                current_ += label;
                flush();
            }
        }
        if (tag.name == "title" && !dropping()) in_title_ = true;
        if (is_void) return;
        const bool dropped = contains(kDropped, tag.name);
        if (dropped) ++dropped_depth_;
        stack_.push_back({tag.name, block, dropped});
        if (tag.name == "h1" && !seen_h1_ && !dropping()) {
            seen_h1_ = true;
            capturing_h1_ = true;
        }
    }

    void close(const std::string& name) {
        if (name == "title") in_title_ = false;
        const auto it = std::find_if(stack_.rbegin(), stack_.rend(),
                                     [&](const Open& o) { return o.name == name; });
        if (it == stack_.rend()) {
            if (contains(kBlock, name) && !dropping()) flush();
            return;
        }
        const auto keep = static_cast<std::size_t>(stack_.rend() - it) - 1;
        while (stack_.size() > keep) {
            const Open top = stack_.back();
            if (top.block && !dropping()) flush();
            if (top.name == "h1") capturing_h1_ = false;
            if (top.dropped) --dropped_depth_;
            stack_.pop_back();
        }
    }

    void text(const std::string& raw) {
        if (dropping()) return;
        if (in_title_) {
            title_ += raw;
            return;
        }
        if (capturing_h1_) first_h1_ += raw;
        current_ += raw;
    }

    std::string prefix() const {
        for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
            if (const int level = heading_level(it->name); level > 0) {
                return std::string(static_cast<std::size_t>(level), '#') + " ";
            }
            if (it->name == "li") return "- ";
        }
        return {};
    }

    void flush() {
        auto body = collapse(current_);
        current_.clear();
        if (body.empty()) return;
        blocks_.push_back(prefix() + body);
    }

    std::vector<Open> stack_;
    std::vector<std::string> blocks_;
    std::string current_;
    std::string title_;
    std::string first_h1_;
    int dropped_depth_ = 0;
    bool in_title_ = false;
    bool seen_h1_ = false;
    bool capturing_h1_ = false;
};

}  // namespace

ExtractedPage extract_text(std::string_view html, std::string_view base_url) {
    const auto clean = sanitize_utf8(html);
    return Extractor().run(clean, base_url);
}

std::string render_paragraphs_html(std::string_view text) {
    std::string out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find("\n\n", start);
        if (end == std::string_view::npos) end = text.size();
        const auto para = text.substr(start, end - start);
        if (!para.empty()) {
            out += "<p>";
            for (const char c : para) {
                switch (c) {
                    case '&': out += "&amp;"; break;
                    case '<': out += "&lt;"; break;
                    case '>': out += "&gt;"; break;
                    default: out.push_back(c);
                }
            }
            out += "</p>\n";
        }
        start = end + 2;
    }
    return out;
}

}  // namespace tutorstack::kb
