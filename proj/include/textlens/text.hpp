#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace textlens {

namespace detail {

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Decodes one UTF-8 codepoint at i and advances i past it. A byte that does
// not open a valid sequence is passed through on its own.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 1;
    char32_t cp = b0;
    if (b0 >= 0xF0) {
        len = 4;
        cp = b0 & 0x07u;
    } else if (b0 >= 0xE0) {
        len = 3;
        cp = b0 & 0x0Fu;
    } else if (b0 >= 0xC0) {
        len = 2;
        cp = b0 & 0x1Fu;
    }
    if (i + static_cast<std::size_t>(len) > s.size()) {
        ++i;
        return b0;
    }
    for (int k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((b & 0xC0u) != 0x80u) {
            ++i;
            return b0;
        }
        cp = (cp << 6) | (b & 0x3Fu);
    }
    i += static_cast<std::size_t>(len);
    return cp;
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

// Codepoint ranges dropped as emoji and emoji plumbing.
inline bool is_emoji(char32_t cp) {
    return (cp >= 0x1F000 && cp <= 0x1FFFF)  // pictographs, emoticons, transport, flags
           || (cp >= 0x2600 && cp <= 0x27BF)  // misc symbols, dingbats
           || (cp >= 0x2B00 && cp <= 0x2BFF)  // stars, heavy arrows, geometric shapes
           || (cp >= 0xFE00 && cp <= 0xFE0F)  // variation selectors
           || cp == 0x200D                    // zero-width joiner
           || cp == 0x20E3;                   // combining enclosing keycap
}

inline bool starts_url(std::string_view s, std::size_t i) {
    const auto rest = s.substr(i);
    return rest.starts_with("http://") || rest.starts_with("https://") ||
           rest.starts_with("www.");
}

}  // namespace detail

// Canonical text cleanup: ASCII lowercasing, web links ("http://", "https://"
// or "www." up to the next whitespace) removed, emoji codepoints removed,
// whitespace runs collapsed to single spaces, ends trimmed. Idempotent.
// @mentions and #hashtags survive untouched.
inline std::string normalize(std::string_view text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (char c : text) {
        lowered.push_back(
            (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
    }

    std::string delinked;
    delinked.reserve(lowered.size());
    for (std::size_t i = 0; i < lowered.size();) {
        if (detail::starts_url(lowered, i)) {
            while (i < lowered.size() && !detail::is_space(lowered[i])) {
                ++i;
            }
            continue;
        }
        delinked.push_back(lowered[i]);
        ++i;
    }

    std::string kept;
    kept.reserve(delinked.size());
    for (std::size_t i = 0; i < delinked.size();) {
        const std::size_t start = i;
        const char32_t cp = detail::decode_utf8(delinked, i);
        if (detail::is_emoji(cp)) {
            continue;
        }
        kept.append(delinked, start, i - start);
    }

    std::string out;
    out.reserve(kept.size());
    bool pending_space = false;
    for (char c : kept) {
        if (detail::is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

// Whitespace split with ASCII punctuation stripped from token edges. A
// leading '@' or '#' is kept so mentions and hashtags stay whole; interior
// punctuation (apostrophes, dots in "d.c.") is untouched. Empty tokens drop.
inline std::vector<std::string> tokenize(std::string_view text) {
    const auto is_ascii_punct = [](char c) {
        return static_cast<unsigned char>(c) < 0x80 &&
               std::ispunct(static_cast<unsigned char>(c)) != 0;
    };

    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && detail::is_space(text[i])) {
            ++i;
        }
        std::size_t j = i;
        while (j < text.size() && !detail::is_space(text[j])) {
            ++j;
        }
        if (j > i) {
            std::size_t b = i;
            std::size_t e = j;
            while (b < e && is_ascii_punct(text[b]) && text[b] != '@' && text[b] != '#') {
                ++b;
            }
            while (e > b + 1 && is_ascii_punct(text[e - 1])) {
                --e;
            }
            // a single leftover punctuation char is a token only if '@'/'#'
            if (e == b + 1 && is_ascii_punct(text[b]) && text[b] != '@' && text[b] != '#') {
                e = b;
            }
            if (e > b) {
                tokens.emplace_back(text.substr(b, e - b));
            }
        }
        i = j;
    }
    return tokens;
}

}  // namespace textlens
