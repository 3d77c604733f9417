#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cabrita/tokenizer.hpp"

namespace cabrita {

// Reference points from a full-scale Portuguese adaptation run (a 32k-piece
// base grown to 52k pieces), measured on a ~7,400-word parallel sample. Kept
// for context next to desk-scale results; nothing here reproduces them.
inline constexpr int64_t kReferenceBaseTokensPt = 15648;
inline constexpr int64_t kReferenceAdaptedTokensPt = 9666;
inline constexpr int64_t kReferenceBaseTokensEn = 10280;
inline constexpr int64_t kReferenceAdaptedTokensEn = 9017;

struct BenchEntry {
    std::string name;
    int64_t vocab_size = 0;
    int64_t tokens_a = 0;
    int64_t tokens_b = 0;
    double fertility_a = 0.0; // tokens per whitespace word of text A
    double fertility_b = 0.0;

    bool operator==(const BenchEntry&) const = default;
};

struct BenchResult {
    int64_t words_a = 0;
    int64_t words_b = 0;
    std::vector<BenchEntry> entries; // input order

    bool operator==(const BenchResult&) const = default;
};

// Encodes both texts with every tokenizer. Texts must be non-empty.
BenchResult run_bench(const std::vector<std::pair<std::string, const TokenizerModel*>>& tokenizers,
                      std::string_view text_a, std::string_view text_b);

struct ReductionReport {
    std::string base_name;
    std::string adapted_name;
    // (base - adapted) / base * 100 per language; negative values mean the
    // adapted tokenizer needs more tokens.
    double reduction_a_pct = 0.0;
    double reduction_b_pct = 0.0;
};

ReductionReport reduction_report(const BenchResult& result, const std::string& base_name,
                                 const std::string& adapted_name);

// Columns: Model, Vocab Size, Tokens (B), Tokens (A); row order preserved.
std::string emit_table_markdown(const BenchResult& result);
std::string emit_table_csv(const BenchResult& result);

} // namespace cabrita
