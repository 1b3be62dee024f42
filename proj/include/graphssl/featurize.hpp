#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "graphssl/errors.hpp"
#include "graphssl/graph.hpp"
#include "graphssl/rng.hpp"
#include "graphssl/tensor.hpp"

namespace graphssl {

namespace detail {

// Decodes one UTF-8 code point at s[i]; advances i. Malformed bytes decode as
// their raw value so tokenization never fails on dirty input.
inline char32_t utf8_next(std::string_view s, std::size_t& i) {
    const unsigned char c0 = static_cast<unsigned char>(s[i]);
    if (c0 < 0x80) {
        ++i;
        return c0;
    }
    int extra = 0;
    char32_t cp = 0;
    if ((c0 & 0xE0) == 0xC0) {
        cp = c0 & 0x1F;
        extra = 1;
    } else if ((c0 & 0xF0) == 0xE0) {
        cp = c0 & 0x0F;
        extra = 2;
    } else if ((c0 & 0xF8) == 0xF0) {
        cp = c0 & 0x07;
        extra = 3;
    } else {
        ++i;
        return c0;
    }
    if (i + static_cast<std::size_t>(extra) >= s.size()) {
        // truncated sequence
        ++i;
        return c0;
    }
    for (int k = 1; k <= extra; ++k) {
        const unsigned char ck = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((ck & 0xC0) != 0x80) {
            ++i;
            return c0;
        }
        cp = (cp << 6) | (ck & 0x3F);
    }
    i += static_cast<std::size_t>(extra) + 1;
    return cp;
}

inline bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680:
        case 0x2000: case 0x2001: case 0x2002: case 0x2003: case 0x2004:
        case 0x2005: case 0x2006: case 0x2007: case 0x2008: case 0x2009:
        case 0x200A: case 0x2028: case 0x2029: case 0x202F: case 0x205F:
        case 0x3000:
            return true;
        default:
            return false;
    }
}

}  // namespace detail

// Lowercases ASCII letters and splits on Unicode whitespace. Non-ASCII bytes
// pass through untouched, so CJK text tokenizes by whitespace runs only.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    std::size_t i = 0;
    while (i < text.size()) {
        const std::size_t start = i;
        const char32_t cp = detail::utf8_next(text, i);
        if (detail::is_unicode_space(cp)) {
            if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
            continue;
        }
        if (cp < 0x80) {
            char c = static_cast<char>(cp);
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            cur.push_back(c);
        } else {
            cur.append(text.substr(start, i - start));
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

// Hashed bag of words: FNV-1a bucket counts, L2-normalized. Empty text maps
// to the zero vector.
inline Tensor featurize_text(std::string_view text, std::size_t d_x) {
    if (d_x < 2) throw DimensionError("featurize_text: d_x must be >= 2");
    Tensor v = Tensor::zeros({d_x});
    for (const std::string& tok : tokenize(text)) {
        v[static_cast<std::size_t>(fnv1a64(tok) % d_x)] += 1.0;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < d_x; ++i) s += v[i] * v[i];
    if (s > 0.0) {
        const double inv = 1.0 / std::sqrt(s);
        for (std::size_t i = 0; i < d_x; ++i) v[i] *= inv;
    }
    return v;
}

// Feature matrix for one claim's posts, row per post.
inline Tensor featurize_posts(const std::vector<Post>& posts, std::size_t d_x) {
    Tensor x = Tensor::zeros({posts.size(), d_x});
    for (std::size_t i = 0; i < posts.size(); ++i) {
        const Tensor row = featurize_text(posts[i].text, d_x);
        for (std::size_t j = 0; j < d_x; ++j) x[i * d_x + j] = row[j];
    }
    return x;
}

}  // namespace graphssl
