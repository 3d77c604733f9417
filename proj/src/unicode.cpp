#include "cabrita/unicode.hpp"

#include <algorithm>
#include <cstddef>

#include "cabrita/error.hpp"
#include "unicode_tables.inc"

namespace cabrita::unicode {

namespace {

using namespace cabrita::unicode_tables;

constexpr char32_t kHangulSBase = 0xAC00;
constexpr char32_t kHangulLBase = 0x1100;
constexpr char32_t kHangulVBase = 0x1161;
constexpr char32_t kHangulTBase = 0x11A7;
constexpr int kHangulLCount = 19;
constexpr int kHangulVCount = 21;
constexpr int kHangulTCount = 28;
constexpr int kHangulNCount = kHangulVCount * kHangulTCount;
constexpr int kHangulSCount = kHangulLCount * kHangulNCount;

// Binary search over a flat (key, v1, ..., vN) stride table; returns the
// record index or -1.
template <std::size_t Stride, std::size_t N>
long find_record(const uint32_t (&table)[N], uint32_t key) {
    long lo = 0;
    long hi = static_cast<long>(N / Stride) - 1;
    while (lo <= hi) {
        long mid = lo + (hi - lo) / 2;
        uint32_t k = table[static_cast<std::size_t>(mid) * Stride];
        if (k == key) return mid;
        if (k < key)
            lo = mid + 1;
        else
            hi = mid - 1;
    }
    return -1;
}

bool is_hangul_syllable(char32_t cp) {
    return cp >= kHangulSBase && cp < kHangulSBase + kHangulSCount;
}

void decompose_one(char32_t cp, std::u32string& out) {
    if (is_hangul_syllable(cp)) {
        int s = static_cast<int>(cp - kHangulSBase);
        out.push_back(kHangulLBase + static_cast<char32_t>(s / kHangulNCount));
        out.push_back(kHangulVBase + static_cast<char32_t>((s % kHangulNCount) / kHangulTCount));
        int t = s % kHangulTCount;
        if (t > 0) out.push_back(kHangulTBase + static_cast<char32_t>(t));
        return;
    }
    long rec = find_record<3>(kDecompEntries, static_cast<uint32_t>(cp));
    if (rec < 0) {
        out.push_back(cp);
        return;
    }
    uint32_t off = kDecompEntries[static_cast<std::size_t>(rec) * 3 + 1];
    uint32_t len = kDecompEntries[static_cast<std::size_t>(rec) * 3 + 2];
    for (uint32_t i = 0; i < len; ++i) out.push_back(kDecompPool[off + i]);
}

// 0 if no composition exists for (starter, mark).
char32_t compose_pair(char32_t a, char32_t b) {
    // Hangul L+V and LV+T.
    if (a >= kHangulLBase && a < kHangulLBase + kHangulLCount &&
        b >= kHangulVBase && b < kHangulVBase + kHangulVCount) {
        int l = static_cast<int>(a - kHangulLBase);
        int v = static_cast<int>(b - kHangulVBase);
        return kHangulSBase + static_cast<char32_t>((l * kHangulVCount + v) * kHangulTCount);
    }
    if (is_hangul_syllable(a) && (a - kHangulSBase) % kHangulTCount == 0 &&
        b > kHangulTBase && b < kHangulTBase + kHangulTCount) {
        return a + (b - kHangulTBase);
    }
    // kCompositions is sorted on (starter, mark).
    long lo = 0;
    long hi = static_cast<long>(std::size(kCompositions) / 3) - 1;
    while (lo <= hi) {
        long mid = lo + (hi - lo) / 2;
        uint32_t ka = kCompositions[static_cast<std::size_t>(mid) * 3];
        uint32_t kb = kCompositions[static_cast<std::size_t>(mid) * 3 + 1];
        if (ka == a && kb == b) return kCompositions[static_cast<std::size_t>(mid) * 3 + 2];
        if (ka < a || (ka == a && kb < b))
            lo = mid + 1;
        else
            hi = mid - 1;
    }
    return 0;
}

} // namespace

bool is_whitespace(char32_t cp) {
    for (uint32_t w : kWhitespace)
        if (w == cp) return true;
    return false;
}

bool is_alpha(char32_t cp) {
    long lo = 0;
    long hi = static_cast<long>(std::size(kAlphaRanges) / 2) - 1;
    while (lo <= hi) {
        long mid = lo + (hi - lo) / 2;
        uint32_t a = kAlphaRanges[static_cast<std::size_t>(mid) * 2];
        uint32_t b = kAlphaRanges[static_cast<std::size_t>(mid) * 2 + 1];
        if (cp < a)
            hi = mid - 1;
        else if (cp > b)
            lo = mid + 1;
        else
            return true;
    }
    return false;
}

bool is_control(char32_t cp) {
    return cp < 0x20 || (cp >= 0x7F && cp <= 0x9F);
}

char32_t to_lower(char32_t cp) {
    long rec = find_record<2>(kSimpleLower, static_cast<uint32_t>(cp));
    if (rec < 0) return cp;
    return kSimpleLower[static_cast<std::size_t>(rec) * 2 + 1];
}

uint8_t combining_class(char32_t cp) {
    long rec = find_record<2>(kCombiningClass, static_cast<uint32_t>(cp));
    if (rec < 0) return 0;
    return static_cast<uint8_t>(kCombiningClass[static_cast<std::size_t>(rec) * 2 + 1]);
}

std::u32string decode_utf8(std::string_view s, bool lenient) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    auto bad = [&](std::size_t at) -> void {
        if (!lenient) throw FormatError("invalid UTF-8 at byte " + std::to_string(at));
        out.push_back(kReplacementChar);
    };
    while (i < s.size()) {
        unsigned char b0 = static_cast<unsigned char>(s[i]);
        if (b0 < 0x80) {
            out.push_back(b0);
            ++i;
            continue;
        }
        int n;
        char32_t cp;
        if ((b0 & 0xE0) == 0xC0) {
            n = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            n = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            n = 4;
            cp = b0 & 0x07;
        } else {
            bad(i);
            ++i;
            continue;
        }
        if (i + static_cast<std::size_t>(n) > s.size()) {
            bad(i);
            ++i;
            continue;
        }
        bool ok = true;
        for (int k = 1; k < n; ++k) {
            unsigned char bk = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
            if ((bk & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (bk & 0x3F);
        }
        // Overlongs, surrogates, out of range.
        if (ok) {
            if ((n == 2 && cp < 0x80) || (n == 3 && cp < 0x800) || (n == 4 && cp < 0x10000) ||
                (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF)
                ok = false;
        }
        if (!ok) {
            bad(i);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += static_cast<std::size_t>(n);
    }
    return out;
}

bool valid_utf8(std::string_view s) {
    try {
        decode_utf8(s, false);
        return true;
    } catch (const FormatError&) {
        return false;
    }
}

void append_utf8(std::string& out, char32_t cp) {
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

std::string encode_utf8(std::u32string_view cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) append_utf8(out, cp);
    return out;
}

std::u32string nfc(std::u32string_view cps) {
    // 1. Full canonical decomposition.
    std::u32string buf;
    buf.reserve(cps.size());
    for (char32_t cp : cps) decompose_one(cp, buf);

    // 2. Canonical ordering: stable sort of nonzero-ccc runs.
    std::size_t i = 0;
    while (i < buf.size()) {
        if (combining_class(buf[i]) == 0) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < buf.size() && combining_class(buf[j]) != 0) ++j;
        std::stable_sort(buf.begin() + static_cast<long>(i), buf.begin() + static_cast<long>(j),
                         [](char32_t a, char32_t b) { return combining_class(a) < combining_class(b); });
        i = j;
    }

    // 3. Canonical composition.
    if (buf.empty()) return buf;
    std::u32string out;
    out.reserve(buf.size());
    long starter = -1; // index into out
    uint8_t last_cc = 255;
    for (char32_t c : buf) {
        uint8_t cc = combining_class(c);
        if (starter >= 0 && (last_cc < cc || last_cc == 0)) {
            char32_t composed = compose_pair(out[static_cast<std::size_t>(starter)], c);
            if (composed != 0) {
                out[static_cast<std::size_t>(starter)] = composed;
                continue; // last_cc unchanged
            }
        }
        if (cc == 0) {
            starter = static_cast<long>(out.size());
            last_cc = 0;
            out.push_back(c);
        } else {
            last_cc = cc;
            out.push_back(c);
        }
    }
    return out;
}

std::string nfc_utf8(std::string_view s) {
    return encode_utf8(nfc(decode_utf8(s)));
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> words;
    std::u32string cps = decode_utf8(s, true);
    std::string cur;
    for (char32_t cp : cps) {
        if (is_whitespace(cp)) {
            if (!cur.empty()) {
                words.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            append_utf8(cur, cp);
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

std::size_t codepoint_count(std::string_view s) {
    std::size_t n = 0;
    for (char c : s)
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
    return n;
}

} // namespace cabrita::unicode
