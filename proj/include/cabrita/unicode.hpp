#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cabrita::unicode {

inline constexpr char32_t kReplacementChar = 0xFFFD;

// Decodes UTF-8 into codepoints. Invalid byte sequences yield
// U+FFFD per offending byte when lenient, otherwise throw FormatError.
std::u32string decode_utf8(std::string_view s, bool lenient = false);

// True if s is well-formed UTF-8.
bool valid_utf8(std::string_view s);

std::string encode_utf8(std::u32string_view cps);
void append_utf8(std::string& out, char32_t cp);

bool is_whitespace(char32_t cp);
bool is_alpha(char32_t cp);
bool is_control(char32_t cp); // Cc: U+0000..001F, U+007F..009F
char32_t to_lower(char32_t cp);

uint8_t combining_class(char32_t cp);

// Canonical composition normalization (NFC): canonical decomposition,
// canonical ordering of combining marks, then recomposition. Hangul is
// composed algorithmically.
std::u32string nfc(std::u32string_view cps);
std::string nfc_utf8(std::string_view s);

// Splits on runs of Unicode whitespace; no empty entries.
std::vector<std::string> split_whitespace(std::string_view s);

// Codepoint count of a UTF-8 string.
std::size_t codepoint_count(std::string_view s);

} // namespace cabrita::unicode
