#!/usr/bin/env python3
"""Regenerates src/unicode_tables.inc from Python's unicodedata.

The tables cover canonical (NFC/NFD) normalization, combining classes,
whitespace, alphabetic ranges and simple lowercase mappings. Hangul is
handled algorithmically at runtime and is excluded here.

Usage: python3 scripts/gen_unicode_tables.py > src/unicode_tables.inc
"""

import sys
import unicodedata

MAX_CP = 0x110000
HANGUL_FIRST, HANGUL_LAST = 0xAC00, 0xD7A3

# Unicode White_Space property, stable list.
WHITESPACE = [
    0x0009, 0x000A, 0x000B, 0x000C, 0x000D, 0x0020, 0x0085, 0x00A0,
    0x1680, 0x2000, 0x2001, 0x2002, 0x2003, 0x2004, 0x2005, 0x2006,
    0x2007, 0x2008, 0x2009, 0x200A, 0x2028, 0x2029, 0x202F, 0x205F,
    0x3000,
]


def surrogate(cp):
    return 0xD800 <= cp <= 0xDFFF


def gen_decompositions():
    """cp -> full canonical decomposition (NFD), excluding Hangul."""
    entries = []
    pool = []
    for cp in range(MAX_CP):
        if surrogate(cp) or HANGUL_FIRST <= cp <= HANGUL_LAST:
            continue
        c = chr(cp)
        d = unicodedata.normalize("NFD", c)
        if d != c:
            seq = [ord(x) for x in d]
            entries.append((cp, len(pool), len(seq)))
            pool.extend(seq)
    return entries, pool


def gen_ccc():
    out = []
    for cp in range(MAX_CP):
        if surrogate(cp):
            continue
        ccc = unicodedata.combining(chr(cp))
        if ccc:
            out.append((cp, ccc))
    return out


def gen_compositions():
    """(starter, combining) -> composed, respecting exclusions."""
    pairs = []
    for cp in range(MAX_CP):
        if surrogate(cp) or HANGUL_FIRST <= cp <= HANGUL_LAST:
            continue
        raw = unicodedata.decomposition(chr(cp))
        if not raw or raw.startswith("<"):
            continue
        parts = raw.split()
        if len(parts) != 2:
            continue
        a, b = (int(p, 16) for p in parts)
        if unicodedata.combining(chr(a)):
            continue
        # Recomposition must actually happen under NFC (filters exclusions).
        if unicodedata.normalize("NFC", chr(a) + chr(b)) == chr(cp):
            pairs.append((a, b, cp))
    pairs.sort()
    return pairs


def gen_alpha_ranges():
    ranges = []
    start = None
    for cp in range(MAX_CP):
        alpha = (not surrogate(cp)) and chr(cp).isalpha()
        if alpha and start is None:
            start = cp
        elif not alpha and start is not None:
            ranges.append((start, cp - 1))
            start = None
    if start is not None:
        ranges.append((start, MAX_CP - 1))
    return ranges


def gen_lowercase():
    out = []
    for cp in range(MAX_CP):
        if surrogate(cp):
            continue
        lo = chr(cp).lower()
        if len(lo) == 1 and lo != chr(cp):
            out.append((cp, ord(lo)))
    return out


def emit_u32_array(name, values, per_line=8):
    print(f"inline constexpr uint32_t {name}[] = {{")
    for i in range(0, len(values), per_line):
        row = ", ".join(f"0x{v:X}" for v in values[i:i + per_line])
        print(f"    {row},")
    print("};")
    print()


def main():
    decomp_entries, decomp_pool = gen_decompositions()
    ccc = gen_ccc()
    comp = gen_compositions()
    alpha = gen_alpha_ranges()
    lower = gen_lowercase()

    print("// Generated by scripts/gen_unicode_tables.py"
          f" (Unicode {unicodedata.unidata_version}). Do not edit.")
    print("#include <cstdint>")
    print()
    print("namespace cabrita::unicode_tables {")
    print()

    flat = []
    for cp, off, n in decomp_entries:
        flat.extend([cp, off, n])
    emit_u32_array("kDecompEntries", flat)  # (cp, pool offset, length)
    emit_u32_array("kDecompPool", decomp_pool)

    flat = []
    for cp, c in ccc:
        flat.extend([cp, c])
    emit_u32_array("kCombiningClass", flat)  # (cp, ccc)

    flat = []
    for a, b, c in comp:
        flat.extend([a, b, c])
    emit_u32_array("kCompositions", flat)  # (starter, mark, composed)

    emit_u32_array("kWhitespace", WHITESPACE)

    flat = []
    for lo, hi in alpha:
        flat.extend([lo, hi])
    emit_u32_array("kAlphaRanges", flat)  # inclusive [lo, hi]

    flat = []
    for cp, lo in lower:
        flat.extend([cp, lo])
    emit_u32_array("kSimpleLower", flat)  # (cp, lowercase cp)

    print("} // namespace cabrita::unicode_tables")
    return 0


if __name__ == "__main__":
    sys.exit(main())
