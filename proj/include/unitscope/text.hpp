#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace unitscope {

// Minimal UTF-8 handling: corpora are UTF-8 and lengths are counted in code
// points, not bytes. Invalid bytes decode leniently as one code point each.
std::vector<std::uint32_t> utf8_decode(std::string_view text);
void utf8_append(std::string& out, std::uint32_t cp);
std::string utf8_encode(const std::vector<std::uint32_t>& cps);
std::size_t utf8_length(std::string_view text);

// ASCII-only case fold, matching the alphabet's folding rule.
inline char fold_char(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}
std::string fold_case(std::string_view text);

std::string trim(std::string_view text);
std::vector<std::string> split_whitespace(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);

bool parse_int(std::string_view text, long long& out);
bool parse_double(std::string_view text, double& out);

}  // namespace unitscope
