#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ornn/common.hpp"

// UTF-8 codepoint iteration and the ad-cleaning rules: join title and
// body, pad emojis with spaces, drop punctuation, strip phone numbers,
// collapse whitespace, lowercase.

namespace ornn {

struct Codepoint {
    char32_t value = 0;
    std::size_t length = 0;  // bytes consumed
};

// Decodes one codepoint; malformed bytes come back as U+FFFD of length 1
// so cleaning never stalls on bad input.
inline Codepoint decode_utf8(std::string_view s, std::size_t pos) {
    const auto byte = [&](std::size_t i) {
        return static_cast<unsigned char>(s[i]);
    };
    unsigned char b0 = byte(pos);
    if (b0 < 0x80) return {b0, 1};
    auto cont = [&](std::size_t i) {
        return i < s.size() && (byte(i) & 0xC0) == 0x80;
    };
    if ((b0 & 0xE0) == 0xC0 && cont(pos + 1)) {
        char32_t v = ((b0 & 0x1Fu) << 6) | (byte(pos + 1) & 0x3Fu);
        return Codepoint{v, 2};
    }
    if ((b0 & 0xF0) == 0xE0 && cont(pos + 1) && cont(pos + 2)) {
        char32_t v = ((b0 & 0x0Fu) << 12) | ((byte(pos + 1) & 0x3Fu) << 6) |
                     (byte(pos + 2) & 0x3Fu);
        return Codepoint{v, 3};
    }
    if ((b0 & 0xF8) == 0xF0 && cont(pos + 1) && cont(pos + 2) &&
        cont(pos + 3)) {
        char32_t v = ((b0 & 0x07u) << 18) | ((byte(pos + 1) & 0x3Fu) << 12) |
                     ((byte(pos + 2) & 0x3Fu) << 6) | (byte(pos + 3) & 0x3Fu);
        return Codepoint{v, 4};
    }
    return {0xFFFD, 1};
}

inline void encode_utf8(char32_t cp, std::string& out) {
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

// Emoji classification by Unicode block: Misc Symbols, Dingbats,
// Misc Symbols & Pictographs, Emoticons, Transport & Map, Supplemental
// Symbols & Pictographs, and regional indicators.
inline bool is_emoji(char32_t cp) {
    return (cp >= 0x2600 && cp <= 0x26FF) ||
           (cp >= 0x2700 && cp <= 0x27BF) ||
           (cp >= 0x1F300 && cp <= 0x1F5FF) ||
           (cp >= 0x1F600 && cp <= 0x1F64F) ||
           (cp >= 0x1F680 && cp <= 0x1F6FF) ||
           (cp >= 0x1F900 && cp <= 0x1F9FF) ||
           (cp >= 0x1F1E6 && cp <= 0x1F1FF);
}

inline bool token_is_emoji(std::string_view token) {
    if (token.empty()) return false;
    Codepoint cp = decode_utf8(token, 0);
    return cp.length == token.size() && is_emoji(cp.value);
}

namespace detail {

inline bool is_ascii_punct(char32_t cp) {
    return cp < 0x80 && std::ispunct(static_cast<int>(cp));
}

inline std::string collapse_whitespace(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (c == ' ') {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

// Removes maximal runs made of digits mixed with spaces, dots, dashes,
// and parentheses that start/end on a digit and contain >= 7 digits.
// Runs here only after punctuation stripping, so a second pass sees the
// same runs and cleaning stays idempotent.
inline std::string strip_phone_numbers(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
    auto is_joiner = [](char c) {
        return c == ' ' || c == '.' || c == '-' || c == '(' || c == ')';
    };
    while (i < s.size()) {
        if (!is_digit(s[i])) {
            out.push_back(s[i++]);
            continue;
        }
        // extend the run greedily, remembering the last digit position
        std::size_t j = i, digits = 0, last_digit = i;
        while (j < s.size() && (is_digit(s[j]) || is_joiner(s[j]))) {
            if (is_digit(s[j])) {
                ++digits;
                last_digit = j;
            }
            ++j;
        }
        if (digits >= 7) {
            out.push_back(' ');
        } else {
            out.append(s, i, last_digit + 1 - i);
        }
        i = last_digit + 1;
    }
    return out;
}

}  // namespace detail

// Full cleaning pass over already-joined text. Idempotent.
inline std::string clean_text(const std::string& joined) {
    std::string spaced;
    spaced.reserve(joined.size() + 16);
    std::size_t i = 0;
    while (i < joined.size()) {
        Codepoint cp = decode_utf8(joined, i);
        i += cp.length;
        if (is_emoji(cp.value)) {
            spaced.push_back(' ');
            encode_utf8(cp.value, spaced);
            spaced.push_back(' ');
        } else if (cp.value == '\t' || cp.value == '\n' || cp.value == '\r' ||
                   detail::is_ascii_punct(cp.value)) {
            spaced.push_back(' ');
        } else if (cp.value < 0x80) {
            spaced.push_back(static_cast<char>(
                std::tolower(static_cast<unsigned char>(cp.value))));
        } else {
            encode_utf8(cp.value, spaced);
        }
    }
    return detail::collapse_whitespace(
        detail::strip_phone_numbers(detail::collapse_whitespace(spaced)));
}

inline std::vector<std::string> split_whitespace(const std::string& text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && text[i] == ' ') ++i;
        std::size_t j = i;
        while (j < text.size() && text[j] != ' ') ++j;
        if (j > i) tokens.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return tokens;
}

}  // namespace ornn
