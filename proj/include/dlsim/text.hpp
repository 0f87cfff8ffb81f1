#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dlsim {

// Decodes the codepoint starting at byte offset `i`, advancing `i`.
// Invalid sequences decode as U+FFFD one byte at a time, so iteration
// always terminates and never throws.
inline uint32_t next_codepoint(std::string_view text, size_t& i) {
    const auto byte = [&](size_t k) { return static_cast<unsigned char>(text[k]); };
    const unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    auto cont = [&](size_t k) { return k < text.size() && (byte(k) & 0xC0) == 0x80; };
    if ((b0 & 0xE0) == 0xC0 && cont(i + 1)) {
        uint32_t cp = (b0 & 0x1Fu) << 6 | (byte(i + 1) & 0x3Fu);
        i += 2;
        return cp;
    }
    if ((b0 & 0xF0) == 0xE0 && cont(i + 1) && cont(i + 2)) {
        uint32_t cp = (b0 & 0x0Fu) << 12 | (byte(i + 1) & 0x3Fu) << 6 | (byte(i + 2) & 0x3Fu);
        i += 3;
        return cp;
    }
    if ((b0 & 0xF8) == 0xF0 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
        uint32_t cp = (b0 & 0x07u) << 18 | (byte(i + 1) & 0x3Fu) << 12 |
                      (byte(i + 2) & 0x3Fu) << 6 | (byte(i + 3) & 0x3Fu);
        i += 4;
        return cp;
    }
    ++i;
    return 0xFFFD;
}

inline bool is_unicode_space(uint32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Tokenization classes: whitespace separates; within a chunk, runs of
// letters/digits and runs of punctuation form separate units. Non-ASCII
// non-space codepoints count as word characters.
enum class CharClass { Space, Word, Punct };

inline CharClass classify_codepoint(uint32_t cp) {
    if (is_unicode_space(cp)) return CharClass::Space;
    if ((cp >= '0' && cp <= '9') || (cp >= 'A' && cp <= 'Z') || (cp >= 'a' && cp <= 'z') ||
        cp >= 0x80)
        return CharClass::Word;
    return CharClass::Punct;
}

// Calls fn(begin, end) for every unit; byte offsets into `text`.
template <class Fn>
void for_each_unit(std::string_view text, Fn&& fn) {
    size_t i = 0;
    size_t unit_start = 0;
    CharClass prev = CharClass::Space;
    while (i < text.size()) {
        const size_t at = i;
        const CharClass cls = classify_codepoint(next_codepoint(text, i));
        if (cls != prev) {
            if (prev != CharClass::Space) fn(unit_start, at);
            if (cls != CharClass::Space) unit_start = at;
            prev = cls;
        }
    }
    if (prev != CharClass::Space) fn(unit_start, text.size());
}

inline size_t count_codepoints(std::string_view text) {
    size_t i = 0, count = 0;
    while (i < text.size()) {
        next_codepoint(text, i);
        ++count;
    }
    return count;
}

inline std::string ascii_lower(std::string_view text) {
    std::string out(text);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace dlsim
