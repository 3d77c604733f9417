#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cabrita {

enum class PieceKind { normal, special, unknown };

std::string_view to_string(PieceKind kind);
PieceKind piece_kind_from_string(std::string_view s);

struct Piece {
    std::string text;
    double score = 0.0;
    PieceKind kind = PieceKind::normal;

    bool operator==(const Piece&) const = default;
};

// Subword vocabulary with merge-precedence scores. Piece id == index into
// `pieces`. Exactly one piece has kind unknown; single characters score 0;
// the k-th learned merge scores -k.
class TokenizerModel {
public:
    static constexpr char32_t kDefaultBoundaryMarker = 0x2581; // U+2581

    // Validates: unique piece strings, exactly one unknown piece, special
    // ids in range and of the right kind. Builds the lookup index.
    static TokenizerModel make(std::vector<Piece> pieces, char32_t boundary_marker,
                               int32_t unk_id, int32_t bos_id, int32_t eos_id);

    int32_t vocab_size() const { return static_cast<int32_t>(pieces_.size()); }
    const std::vector<Piece>& pieces() const { return pieces_; }
    const Piece& piece(int32_t id) const { return pieces_.at(static_cast<std::size_t>(id)); }
    char32_t boundary_marker() const { return boundary_marker_; }
    int32_t unk_id() const { return unk_id_; }
    int32_t bos_id() const { return bos_id_; }
    int32_t eos_id() const { return eos_id_; }

    // -1 if absent.
    int32_t find_piece(std::string_view text) const;

    std::string to_json() const;
    static TokenizerModel from_json(std::string_view json_text);
    void save(const std::string& path) const;
    static TokenizerModel load(const std::string& path);

private:
    TokenizerModel() = default;

    std::vector<Piece> pieces_;
    char32_t boundary_marker_ = kDefaultBoundaryMarker;
    int32_t unk_id_ = 0;
    int32_t bos_id_ = 1;
    int32_t eos_id_ = 2;
    std::unordered_map<std::string, int32_t> index_;
};

struct TrainerConfig {
    int32_t target_vocab_size = 0;
    int max_piece_chars = 16;        // codepoints, boundary marker included
    double character_coverage = 1.0; // in (0, 1]
};

// Trains a BPE vocabulary: specials, covered alphabet, then merges of the
// most frequent adjacent pair until target_vocab_size or no pair occurs
// twice. Ties on pair frequency break toward the lexicographically smallest
// merged string (codepoint order).
TokenizerModel train_bpe(const std::vector<std::string>& corpus, const TrainerConfig& config);

// Splits on whitespace, marks word starts with the boundary marker, then
// greedily applies the highest-scoring vocabulary merge; score ties break
// toward the lower piece id, position ties toward the leftmost occurrence.
// Characters outside the vocabulary emit unk_id.
std::vector<int32_t> encode(const TokenizerModel& model, std::string_view text);

// Concatenates pieces, turns boundary markers into spaces and strips one
// leading space. Control specials decode to nothing, unknown to U+FFFD.
std::string decode(const TokenizerModel& model, const std::vector<int32_t>& ids);

int64_t count_tokens(const TokenizerModel& model, std::string_view text);

} // namespace cabrita
