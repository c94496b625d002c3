#include "unitscope/text.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace unitscope {

std::vector<std::uint32_t> utf8_decode(std::string_view text) {
    std::vector<std::uint32_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const unsigned char c0 = static_cast<unsigned char>(text[i]);
        std::uint32_t cp = c0;
        std::size_t extra = 0;
        if (c0 < 0x80) {
            extra = 0;
        } else if ((c0 & 0xE0) == 0xC0) {
            extra = 1;
            cp = c0 & 0x1F;
        } else if ((c0 & 0xF0) == 0xE0) {
            extra = 2;
            cp = c0 & 0x0F;
        } else if ((c0 & 0xF8) == 0xF0) {
            extra = 3;
            cp = c0 & 0x07;
        } else {
            // stray continuation or invalid lead byte: keep as-is
            out.push_back(c0);
            ++i;
            continue;
        }
        if (extra > 0 && i + extra >= n) {
            // truncated sequence: emit lead byte as one code point
            out.push_back(c0);
            ++i;
            continue;
        }
        bool ok = true;
        std::uint32_t acc = cp;
        for (std::size_t k = 1; k <= extra; ++k) {
            const unsigned char ck = static_cast<unsigned char>(text[i + k]);
            if ((ck & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            acc = (acc << 6) | (ck & 0x3F);
        }
        if (!ok) {
            out.push_back(c0);
            ++i;
            continue;
        }
        out.push_back(acc);
        i += extra + 1;
    }
    return out;
}

void utf8_append(std::string& out, std::uint32_t cp) {
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

std::string utf8_encode(const std::vector<std::uint32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (std::uint32_t cp : cps) utf8_append(out, cp);
    return out;
}

std::size_t utf8_length(std::string_view text) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        std::size_t step = 1;
        if ((c & 0xE0) == 0xC0) step = 2;
        else if ((c & 0xF0) == 0xE0) step = 3;
        else if ((c & 0xF8) == 0xF0) step = 4;
        if (i + step > text.size()) step = 1;
        // verify continuation bytes; fall back to single-byte step if invalid
        for (std::size_t k = 1; k < step; ++k) {
            if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
                step = 1;
                break;
            }
        }
        i += step;
        ++count;
    }
    return count;
}

std::string fold_case(std::string_view text) {
    std::string out(text);
    for (char& c : out) c = fold_char(c);
    return out;
}

std::string trim(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == sep) {
            out.emplace_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

bool parse_int(std::string_view text, long long& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

bool parse_double(std::string_view text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    char* endptr = nullptr;
    out = std::strtod(t.c_str(), &endptr);
    return endptr == t.c_str() + t.size();
}

}  // namespace unitscope
