#include "sii/text.hpp"

#include <algorithm>
#include <cctype>

namespace sii {

namespace {

bool ascii_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

}  // namespace

bool is_space_at(std::string_view s, size_t i, size_t& next) {
    if (i >= s.size()) return false;
    unsigned char c = s[i];
    if (ascii_space(c)) {
        next = i + 1;
        return true;
    }
    // UTF-8 NBSP: C2 A0
    if (c == 0xC2 && i + 1 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0xA0) {
        next = i + 2;
        return true;
    }
    // U+2000..U+200A, U+2028, U+2029, U+202F: E2 80 80..AF ranges
    if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80) {
        unsigned char b3 = s[i + 2];
        if ((b3 >= 0x80 && b3 <= 0x8A) || b3 == 0xA8 || b3 == 0xA9 || b3 == 0xAF) {
            next = i + 3;
            return true;
        }
    }
    // U+205F: E2 81 9F
    if (c == 0xE2 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x81 &&
        static_cast<unsigned char>(s[i + 2]) == 0x9F) {
        next = i + 3;
        return true;
    }
    // U+3000 ideographic space: E3 80 80
    if (c == 0xE3 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
        static_cast<unsigned char>(s[i + 2]) == 0x80) {
        next = i + 3;
        return true;
    }
    return false;
}

std::string trim(std::string_view s) {
    size_t begin = 0;
    size_t next = 0;
    while (begin < s.size() && is_space_at(s, begin, next)) begin = next;
    size_t end = s.size();
    while (end > begin) {
        // Walk back over one trailing whitespace unit (1-3 bytes).
        size_t step = 0;
        bool found = false;
        for (size_t len = 1; len <= 3 && len <= end - begin; ++len) {
            size_t pos = end - len;
            if (is_space_at(s, pos, next) && next == end) {
                step = len;
                found = true;
                break;
            }
        }
        if (!found) break;
        end -= step;
    }
    return std::string(s.substr(begin, end - begin));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    if (from.empty()) return s;
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::string normalize_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    bool pending_space = false;
    while (i < s.size()) {
        size_t next = 0;
        if (is_space_at(s, i, next)) {
            pending_space = !out.empty();
            i = next;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    size_t i = 0;
    std::string current;
    while (i < s.size()) {
        size_t next = 0;
        if (is_space_at(s, i, next)) {
            if (!current.empty()) {
                words.push_back(std::move(current));
                current.clear();
            }
            i = next;
        } else {
            current.push_back(s[i]);
            ++i;
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

size_t count_words(std::string_view s) {
    size_t n = 0;
    size_t i = 0;
    bool in_word = false;
    while (i < s.size()) {
        size_t next = 0;
        if (is_space_at(s, i, next)) {
            in_word = false;
            i = next;
        } else {
            if (!in_word) ++n;
            in_word = true;
            ++i;
        }
    }
    return n;
}

std::vector<std::string> split_on_separators(std::string_view s,
                                             const std::vector<std::string>& separators) {
    std::vector<std::string> seps = separators;
    std::sort(seps.begin(), seps.end(),
              [](const std::string& a, const std::string& b) { return a.size() > b.size(); });

    std::vector<std::string> items;
    std::string current;
    size_t i = 0;
    auto flush = [&]() {
        std::string t = trim(current);
        current.clear();
        if (t.empty()) return;
        if (std::find(items.begin(), items.end(), t) == items.end()) items.push_back(std::move(t));
    };
    while (i < s.size()) {
        bool matched = false;
        for (const auto& sep : seps) {
            if (!sep.empty() && s.compare(i, sep.size(), sep) == 0) {
                flush();
                i += sep.size();
                matched = true;
                break;
            }
        }
        if (!matched) {
            current.push_back(s[i]);
            ++i;
        }
    }
    flush();
    return items;
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> lines;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == '\n') {
            std::string_view line = s.substr(start, i - start);
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            lines.emplace_back(line);
            start = i + 1;
        }
    }
    if (!lines.empty() && lines.back().empty() && !s.empty() && s.back() == '\n') lines.pop_back();
    return lines;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fnv1a64_hex(std::string_view s) {
    static const char* digits = "0123456789abcdef";
    uint64_t h = fnv1a64(s);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

}  // namespace sii
