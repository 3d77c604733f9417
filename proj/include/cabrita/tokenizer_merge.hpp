#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cabrita/tokenizer.hpp"

namespace cabrita {

struct MergeSpec {
    int32_t target_vocab_size = 0;
};

// Keeps every base piece with its id and score, then appends addon pieces
// whose strings the base does not know, in addon id order, until
// target_vocab_size is reached or the addon is exhausted. Specials are never
// appended.
//
// Appended single characters keep score 0; every other appended piece
// continues the base's merge-rank sequence (k-th appended merge scores
// base_min − k, in addon order). Ranking new merges strictly below the base's
// keeps encoding of base-covered text byte-identical through the base merge
// fixpoint — new pieces can only compress further, never reroute a base
// merge — while the addon's own precedence order is preserved among the
// appended pieces.
TokenizerModel merge_tokenizers(const TokenizerModel& base, const TokenizerModel& addon,
                                const MergeSpec& spec);

struct MergeDiffReport {
    std::vector<std::string> appended;      // piece strings appended after the base region
    int32_t base_size = 0;
    int32_t merged_size = 0;
    std::vector<std::string> violations;    // non-empty when the base region was disturbed

    bool ok() const { return violations.empty(); }
};

// Verifies that `merged` preserves `base` as an exact prefix (string, score,
// id, kind) and lists what was appended.
MergeDiffReport merge_diff(const TokenizerModel& base, const TokenizerModel& merged);

std::string render_merge_summary(const MergeDiffReport& report);

} // namespace cabrita
