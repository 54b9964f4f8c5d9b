#include "sii/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "sii/text.hpp"

namespace sii {

namespace {

bool is_name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

std::string local_name(std::string_view qualified) {
    auto pos = qualified.rfind(':');
    std::string name = pos == std::string_view::npos ? std::string(qualified)
                                                     : std::string(qualified.substr(pos + 1));
    return to_lower(name);
}

bool is_html_heading(const std::string& name) {
    return name.size() == 2 && name[0] == 'h' && name[1] >= '1' && name[1] <= '6';
}

bool is_xml_heading(const std::string& name) {
    return name == "title" || name == "section-title" || name == "head";
}

// Tags that appear inside words (subscripts in formulas, emphasis); stripping
// them must not introduce a word boundary.
bool is_inline_tag(const std::string& name) {
    static const std::set<std::string> inline_tags = {
        "a",  "b",  "i",   "u",   "em",   "strong", "span", "sub",
        "sup", "small", "sc", "inf", "italic", "bold", "roman", "tt"};
    return inline_tags.count(name) > 0;
}

void append_codepoint(std::string& out, unsigned long cp) {
    if (cp <= 0x7F) {
        out.push_back(static_cast<char>(cp));
    } else if (cp <= 0x7FF) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp <= 0xFFFF) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp <= 0x10FFFF) {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Decode &amp;/&lt;/&gt;/&quot;/&apos; plus numeric references; anything
// else passes through untouched.
size_t decode_entity(const std::string& raw, size_t amp, std::string& out) {
    size_t semi = raw.find(';', amp + 1);
    if (semi == std::string::npos || semi - amp > 12) {
        out.push_back('&');
        return amp + 1;
    }
    std::string name = raw.substr(amp + 1, semi - amp - 1);
    if (name == "amp") out.push_back('&');
    else if (name == "lt") out.push_back('<');
    else if (name == "gt") out.push_back('>');
    else if (name == "quot") out.push_back('"');
    else if (name == "apos") out.push_back('\'');
    else if (name == "nbsp") out.push_back(' ');
    else if (!name.empty() && name[0] == '#') {
        try {
            unsigned long cp = (name.size() > 1 && (name[1] == 'x' || name[1] == 'X'))
                                   ? std::stoul(name.substr(2), nullptr, 16)
                                   : std::stoul(name.substr(1), nullptr, 10);
            append_codepoint(out, cp);
        } catch (const std::exception&) {
            out.push_back('&');
            return amp + 1;
        }
    } else {
        out.push_back('&');
        return amp + 1;
    }
    return semi + 1;
}

struct MarkupScanner {
    const std::string& raw;
    MarkupFormat format;
    std::vector<std::string>& warnings;

    std::vector<Section> sections;
    std::string title;
    std::string body;
    std::string header;       // header of the section being accumulated
    std::string heading_text; // text inside the currently open heading tag
    std::string heading_tag;  // empty when not inside a heading
    bool capture_title = false;
    std::string skip_until_close;  // script/style raw content

    explicit MarkupScanner(const std::string& r, MarkupFormat f, std::vector<std::string>& w)
        : raw(r), format(f), warnings(w) {}

    void flush_section() {
        std::string clean = normalize_whitespace(body);
        if (!clean.empty() || !header.empty()) sections.push_back({header, clean});
        body.clear();
    }

    void text(char c) {
        if (!skip_until_close.empty()) return;
        if (capture_title) title.push_back(c);
        else if (!heading_tag.empty()) heading_text.push_back(c);
        else body.push_back(c);
    }

    void text(const std::string& s) {
        for (char c : s) text(c);
    }

    bool is_heading(const std::string& name) const {
        return format == MarkupFormat::html ? is_html_heading(name) : is_xml_heading(name);
    }

    void open_tag(const std::string& name, bool self_closing, size_t pos) {
        if (!skip_until_close.empty()) return;
        if (format == MarkupFormat::html && (name == "script" || name == "style")) {
            if (!self_closing) skip_until_close = name;
            return;
        }
        if (format == MarkupFormat::html && name == "title" && title.empty()) {
            if (!self_closing) capture_title = true;
            return;
        }
        if (format == MarkupFormat::xml && name == "article-title" && title.empty()) {
            if (!self_closing) capture_title = true;
            return;
        }
        if (is_heading(name)) {
            if (!heading_tag.empty()) {
                warnings.push_back("nested heading <" + name + "> at offset " +
                                   std::to_string(pos));
                end_heading();
            }
            if (self_closing) return;
            heading_tag = name;
            heading_text.clear();
            return;
        }
        if (!is_inline_tag(name)) text(' ');
    }

    void end_heading() {
        flush_section();
        header = normalize_whitespace(heading_text);
        heading_tag.clear();
        heading_text.clear();
        // XML articles often reuse <title> for the document title.
        if (format == MarkupFormat::xml && title.empty() && sections.empty()) title = header;
    }

    void close_tag(const std::string& name) {
        if (!skip_until_close.empty()) {
            if (name == skip_until_close) skip_until_close.clear();
            return;
        }
        if (capture_title && (name == "title" || name == "article-title")) {
            capture_title = false;
            title = normalize_whitespace(title);
            return;
        }
        if (!heading_tag.empty() && name == heading_tag) {
            end_heading();
            return;
        }
        if (!is_inline_tag(name)) text(' ');
    }

    Document finish(const std::string& doc_id) {
        if (!heading_tag.empty()) {
            warnings.push_back("heading <" + heading_tag + "> not closed before end of document");
            end_heading();
        }
        if (capture_title) {
            warnings.push_back("title element not closed before end of document");
            title = normalize_whitespace(title);
        }
        flush_section();
        return Document{doc_id, title, std::move(sections)};
    }
};

Document parse_markup(const std::string& raw, MarkupFormat format, const std::string& doc_id,
                      std::vector<std::string>& warnings) {
    MarkupScanner scan(raw, format, warnings);
    size_t i = 0;
    const size_t n = raw.size();
    while (i < n) {
        char c = raw[i];
        if (c == '&') {
            std::string decoded;
            i = decode_entity(raw, i, decoded);
            scan.text(decoded);
            continue;
        }
        if (c != '<') {
            scan.text(c);
            ++i;
            continue;
        }
        if (raw.compare(i, 4, "<!--") == 0) {
            size_t end = raw.find("-->", i + 4);
            if (end == std::string::npos) {
                warnings.push_back("unterminated comment at offset " + std::to_string(i));
                break;
            }
            i = end + 3;
            continue;
        }
        if (raw.compare(i, 9, "<![CDATA[") == 0) {
            size_t end = raw.find("]]>", i + 9);
            if (end == std::string::npos) {
                warnings.push_back("unterminated CDATA at offset " + std::to_string(i));
                scan.text(raw.substr(i + 9));
                break;
            }
            scan.text(raw.substr(i + 9, end - i - 9));
            i = end + 3;
            continue;
        }
        if (i + 1 < n && (raw[i + 1] == '!' || raw[i + 1] == '?')) {
            size_t end = raw.find('>', i);
            if (end == std::string::npos)
                throw std::runtime_error("unterminated declaration at offset " +
                                         std::to_string(i));
            i = end + 1;
            continue;
        }
        bool closing = i + 1 < n && raw[i + 1] == '/';
        size_t name_start = i + (closing ? 2 : 1);
        if (name_start >= n || !is_name_start(raw[name_start])) {
            // Literal '<' in running text; tolerated with a note.
            warnings.push_back("stray '<' at offset " + std::to_string(i));
            scan.text('<');
            ++i;
            continue;
        }
        size_t end = raw.find('>', i);
        if (end == std::string::npos)
            throw std::runtime_error("unterminated tag at offset " + std::to_string(i));
        std::string inside = raw.substr(name_start, end - name_start);
        bool self_closing = !inside.empty() && inside.back() == '/';
        if (self_closing) inside.pop_back();
        size_t name_end = 0;
        while (name_end < inside.size() && !std::isspace(static_cast<unsigned char>(inside[name_end])))
            ++name_end;
        std::string name = local_name(std::string_view(inside).substr(0, name_end));
        if (closing) scan.close_tag(name);
        else scan.open_tag(name, self_closing, i);
        i = end + 1;
    }
    return scan.finish(doc_id);
}

bool is_all_caps_heading(const std::string& line) {
    if (line.size() > 120) return false;
    bool has_letter = false;
    for (unsigned char c : line) {
        if (std::isalpha(c)) {
            has_letter = true;
            if (std::islower(c)) return false;
        }
    }
    return has_letter;
}

bool is_numbered_heading(const std::string& line) {
    if (line.size() > 120) return false;
    size_t i = 0;
    if (i < line.size() && (line[i] == 'S' || line[i] == 'A')) ++i;  // "S1 Experimental details"
    size_t digits_start = i;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == digits_start) return false;
    while (i + 1 < line.size() && line[i] == '.' &&
           std::isdigit(static_cast<unsigned char>(line[i + 1]))) {
        ++i;
        while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    }
    if (i < line.size() && line[i] == '.') ++i;
    if (i >= line.size() || line[i] != ' ') return false;
    if (count_words(line) > 12) return false;
    return true;
}

Document parse_plain(const std::string& raw, const std::string& doc_id) {
    auto lines = split_lines(raw);
    std::vector<Section> sections;
    std::string header;
    std::string body;
    auto flush = [&]() {
        std::string clean = normalize_whitespace(body);
        if (!clean.empty() || !header.empty()) sections.push_back({header, clean});
        body.clear();
    };
    bool prev_blank = true;
    for (const auto& raw_line : lines) {
        std::string line = trim(raw_line);
        if (line.empty()) {
            prev_blank = true;
            body += '\n';
            continue;
        }
        if (prev_blank && (is_all_caps_heading(line) || is_numbered_heading(line))) {
            flush();
            header = line;
        } else {
            body += line;
            body += '\n';
        }
        prev_blank = false;
    }
    flush();
    return Document{doc_id, "", std::move(sections)};
}

}  // namespace

MarkupFormat markup_format_from_name(const std::string& name) {
    std::string n = to_lower(name);
    if (n == "xml") return MarkupFormat::xml;
    if (n == "html" || n == "htm") return MarkupFormat::html;
    if (n == "plain" || n == "txt" || n == "text") return MarkupFormat::plain;
    throw std::runtime_error("unknown markup format: '" + name + "'");
}

MarkupFormat infer_format_from_path(const std::string& path) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : to_lower(path.substr(dot + 1));
    if (ext == "xml") return MarkupFormat::xml;
    if (ext == "html" || ext == "htm") return MarkupFormat::html;
    return MarkupFormat::plain;
}

IngestResult ingest_document(const std::string& raw, MarkupFormat format,
                             const std::string& doc_id) {
    if (trim(raw).empty()) throw std::runtime_error("empty document" + (doc_id.empty() ? "" : ": " + doc_id));
    IngestResult result;
    result.document = format == MarkupFormat::plain
                          ? parse_plain(raw, doc_id)
                          : parse_markup(raw, format, doc_id, result.warnings);
    if (result.document.sections.empty())
        throw std::runtime_error("no sections found" + (doc_id.empty() ? "" : " in " + doc_id));
    return result;
}

const std::set<std::string>& default_section_keywords() {
    static const std::set<std::string> keywords = {"experimental", "materials", "methods",
                                                   "experiment"};
    return keywords;
}

ExtractedContent make_extracted_content(const std::string& doc_id, const std::string& text,
                                        double token_ratio) {
    ExtractedContent content;
    content.doc_id = doc_id;
    content.text = text;
    content.word_count = count_words(text);
    content.token_estimate =
        static_cast<size_t>(std::ceil(static_cast<double>(content.word_count) * token_ratio));
    return content;
}

std::optional<ExtractedContent> select_experimental_sections(const Document& doc,
                                                             const std::set<std::string>& keywords,
                                                             double token_ratio) {
    if (keywords.empty()) throw std::runtime_error("keyword set must be non-empty");
    std::string text;
    for (const auto& section : doc.sections) {
        std::string header = to_lower(section.header);
        bool hit = std::any_of(keywords.begin(), keywords.end(),
                               [&](const std::string& k) { return contains(header, to_lower(k)); });
        if (!hit) continue;
        if (!section.body.empty()) {
            if (!text.empty()) text += '\n';
            text += section.body;
        }
    }
    if (trim(text).empty()) return std::nullopt;
    return make_extracted_content(doc.doc_id, text, token_ratio);
}

GateResult gate_token_limit(const ExtractedContent& content, const TokenGate& gate) {
    if (gate.budget == 0) throw std::runtime_error("token budget must be positive");
    if (content.token_estimate + gate.completion_reserve <= gate.budget) return {true, ""};
    return {false, "token budget exceeded: estimate " + std::to_string(content.token_estimate) +
                       " + reserve " + std::to_string(gate.completion_reserve) + " > budget " +
                       std::to_string(gate.budget)};
}

}  // namespace sii
