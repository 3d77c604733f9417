#include "cabrita/tokenizer_merge.hpp"

#include <algorithm>
#include <sstream>

#include "cabrita/error.hpp"
#include "cabrita/unicode.hpp"

namespace cabrita {

TokenizerModel merge_tokenizers(const TokenizerModel& base, const TokenizerModel& addon,
                                const MergeSpec& spec) {
    if (spec.target_vocab_size < base.vocab_size())
        throw DataError("merge target " + std::to_string(spec.target_vocab_size) +
                        " below base vocabulary size " + std::to_string(base.vocab_size()));
    if (base.boundary_marker() != addon.boundary_marker())
        throw DataError("base and addon use different boundary markers");

    double base_min_score = 0.0;
    for (const Piece& p : base.pieces()) base_min_score = std::min(base_min_score, p.score);

    std::vector<Piece> pieces = base.pieces();
    int64_t appended_merges = 0;
    for (int32_t id = 0; id < addon.vocab_size(); ++id) {
        if (static_cast<int32_t>(pieces.size()) >= spec.target_vocab_size) break;
        const Piece& p = addon.piece(id);
        if (p.kind != PieceKind::normal) continue; // specials matched by kind, never appended
        if (base.find_piece(p.text) >= 0) continue;
        double score = unicode::codepoint_count(p.text) <= 1
                           ? p.score
                           : base_min_score - static_cast<double>(++appended_merges);
        pieces.push_back(Piece{p.text, score, PieceKind::normal});
    }
    return TokenizerModel::make(std::move(pieces), base.boundary_marker(), base.unk_id(),
                                base.bos_id(), base.eos_id());
}

MergeDiffReport merge_diff(const TokenizerModel& base, const TokenizerModel& merged) {
    MergeDiffReport report;
    report.base_size = base.vocab_size();
    report.merged_size = merged.vocab_size();

    if (merged.vocab_size() < base.vocab_size())
        report.violations.push_back("merged vocabulary smaller than base");
    if (merged.boundary_marker() != base.boundary_marker())
        report.violations.push_back("boundary marker changed");
    if (merged.unk_id() != base.unk_id() || merged.bos_id() != base.bos_id() ||
        merged.eos_id() != base.eos_id())
        report.violations.push_back("special ids changed");

    int32_t common = std::min(base.vocab_size(), merged.vocab_size());
    for (int32_t id = 0; id < common; ++id) {
        const Piece& b = base.piece(id);
        const Piece& m = merged.piece(id);
        if (b.text != m.text)
            report.violations.push_back("piece " + std::to_string(id) + " text changed: '" +
                                        b.text + "' -> '" + m.text + "'");
        else if (b.score != m.score)
            report.violations.push_back("piece '" + b.text + "' score changed");
        else if (b.kind != m.kind)
            report.violations.push_back("piece '" + b.text + "' kind changed");
    }
    for (int32_t id = base.vocab_size(); id < merged.vocab_size(); ++id)
        report.appended.push_back(merged.piece(id).text);
    return report;
}

std::string render_merge_summary(const MergeDiffReport& report) {
    std::ostringstream os;
    os << "base size:      " << report.base_size << "\n"
       << "appended:       " << report.appended.size() << "\n"
       << "final size:     " << report.merged_size << "\n"
       << "violations:     " << report.violations.size() << "\n";
    for (const std::string& v : report.violations) os << "  - " << v << "\n";
    return os.str();
}

} // namespace cabrita
