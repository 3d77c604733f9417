#include "cabrita/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "cabrita/error.hpp"
#include "cabrita/unicode.hpp"

namespace cabrita {

namespace uni = cabrita::unicode;
using json = nlohmann::json;

std::string_view to_string(PieceKind kind) {
    switch (kind) {
        case PieceKind::normal: return "normal";
        case PieceKind::special: return "special";
        case PieceKind::unknown: return "unknown";
    }
    return "normal";
}

PieceKind piece_kind_from_string(std::string_view s) {
    if (s == "normal") return PieceKind::normal;
    if (s == "special") return PieceKind::special;
    if (s == "unknown") return PieceKind::unknown;
    throw FormatError("unknown piece kind: " + std::string(s));
}

TokenizerModel TokenizerModel::make(std::vector<Piece> pieces, char32_t boundary_marker,
                                    int32_t unk_id, int32_t bos_id, int32_t eos_id) {
    TokenizerModel m;
    m.pieces_ = std::move(pieces);
    m.boundary_marker_ = boundary_marker;
    m.unk_id_ = unk_id;
    m.bos_id_ = bos_id;
    m.eos_id_ = eos_id;

    if (m.pieces_.empty()) throw FormatError("tokenizer has no pieces");
    if (boundary_marker == 0) throw FormatError("boundary marker must be a character");
    auto in_range = [&](int32_t id) { return id >= 0 && id < m.vocab_size(); };
    if (!in_range(unk_id) || !in_range(bos_id) || !in_range(eos_id))
        throw FormatError("special id out of range");

    int unknown_count = 0;
    for (std::size_t i = 0; i < m.pieces_.size(); ++i) {
        const Piece& p = m.pieces_[i];
        if (p.text.empty()) throw FormatError("empty piece at id " + std::to_string(i));
        if (p.kind == PieceKind::unknown) ++unknown_count;
        auto [it, inserted] = m.index_.emplace(p.text, static_cast<int32_t>(i));
        if (!inserted) throw FormatError("duplicate piece: " + p.text);
    }
    if (unknown_count != 1) throw FormatError("exactly one unknown piece required");
    if (m.pieces_[static_cast<std::size_t>(unk_id)].kind != PieceKind::unknown)
        throw FormatError("unk_id does not point at the unknown piece");
    if (m.pieces_[static_cast<std::size_t>(bos_id)].kind != PieceKind::special ||
        m.pieces_[static_cast<std::size_t>(eos_id)].kind != PieceKind::special)
        throw FormatError("bos/eos ids must be special pieces");
    return m;
}

int32_t TokenizerModel::find_piece(std::string_view text) const {
    auto it = index_.find(std::string(text));
    return it == index_.end() ? -1 : it->second;
}

std::string TokenizerModel::to_json() const {
    json specials = {{"unk_id", unk_id_}, {"bos_id", bos_id_}, {"eos_id", eos_id_}};
    json parr = json::array();
    for (const Piece& p : pieces_) parr.push_back({p.text, p.score, std::string(to_string(p.kind))});
    std::string marker;
    uni::append_utf8(marker, boundary_marker_);
    json doc = {{"format_version", 1},
                {"boundary_marker", marker},
                {"specials", specials},
                {"pieces", parr}};
    return doc.dump();
}

TokenizerModel TokenizerModel::from_json(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("tokenizer JSON parse error: ") + e.what());
    }
    if (!doc.is_object()) throw FormatError("tokenizer JSON root must be an object");
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (key != "format_version" && key != "boundary_marker" && key != "specials" &&
            key != "pieces")
            throw FormatError("unexpected key in tokenizer JSON: " + key);
    }
    if (!doc.contains("format_version") || !doc["format_version"].is_number_integer() ||
        doc["format_version"].get<int>() != 1)
        throw FormatError("unsupported tokenizer format_version");
    if (!doc.contains("boundary_marker") || !doc["boundary_marker"].is_string())
        throw FormatError("missing boundary_marker");
    std::u32string marker = uni::decode_utf8(doc["boundary_marker"].get<std::string>());
    if (marker.size() != 1) throw FormatError("boundary_marker must be one character");
    if (!doc.contains("specials") || !doc.contains("pieces") || !doc["pieces"].is_array())
        throw FormatError("missing specials or pieces");
    const json& sp = doc["specials"];
    if (!sp.is_object() || !sp.contains("unk_id") || !sp.contains("bos_id") || !sp.contains("eos_id"))
        throw FormatError("specials must declare unk_id, bos_id, eos_id");

    std::vector<Piece> pieces;
    pieces.reserve(doc["pieces"].size());
    for (const json& row : doc["pieces"]) {
        if (!row.is_array() || row.size() != 3 || !row[0].is_string() || !row[1].is_number() ||
            !row[2].is_string())
            throw FormatError("piece rows must be [text, score, kind]");
        pieces.push_back(Piece{row[0].get<std::string>(), row[1].get<double>(),
                               piece_kind_from_string(row[2].get<std::string>())});
    }
    return make(std::move(pieces), marker[0], sp["unk_id"].get<int32_t>(),
                sp["bos_id"].get<int32_t>(), sp["eos_id"].get<int32_t>());
}

void TokenizerModel::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f << to_json() << '\n';
    if (!f) throw DataError("write failed: " + path);
}

TokenizerModel TokenizerModel::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open tokenizer file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

struct PairKey {
    int32_t left;
    int32_t right;
    bool operator==(const PairKey&) const = default;
};

struct PairKeyHash {
    std::size_t operator()(const PairKey& k) const {
        return std::hash<uint64_t>()((static_cast<uint64_t>(static_cast<uint32_t>(k.left)) << 32) |
                                     static_cast<uint32_t>(k.right));
    }
};

struct PairStat {
    int64_t count = 0;
    std::unordered_set<int32_t> words; // indices of words containing the pair
};

struct HeapEntry {
    int64_t count;
    std::string merged;
    int32_t left;
    int32_t right;
};

// priority_queue keeps the "largest"; preference order is higher count,
// then lexicographically smaller merged string, then smaller (left, right).
struct HeapLess {
    bool operator()(const HeapEntry& a, const HeapEntry& b) const {
        if (a.count != b.count) return a.count < b.count;
        if (a.merged != b.merged) return a.merged > b.merged;
        if (a.left != b.left) return a.left > b.left;
        return a.right > b.right;
    }
};

struct TrainWord {
    std::vector<int32_t> syms; // piece ids, -1 for uncovered characters
    int64_t freq = 0;
};

void validate_config(const TrainerConfig& c) {
    if (c.target_vocab_size <= 0) throw DataError("target_vocab_size must be positive");
    if (c.max_piece_chars < 2) throw DataError("max_piece_chars must be at least 2");
    if (!(c.character_coverage > 0.0 && c.character_coverage <= 1.0))
        throw DataError("character_coverage must be in (0, 1]");
}

} // namespace

TokenizerModel train_bpe(const std::vector<std::string>& corpus, const TrainerConfig& config) {
    validate_config(config);
    if (corpus.empty()) throw DataError("empty corpus");

    std::unordered_map<std::string, int64_t> word_freq;
    for (const std::string& text : corpus)
        for (std::string& w : uni::split_whitespace(text)) word_freq[std::move(w)] += 1;
    if (word_freq.empty()) throw DataError("empty corpus");

    const char32_t marker = TokenizerModel::kDefaultBoundaryMarker;

    // Character frequencies; the boundary marker is always in the alphabet
    // and does not take part in the coverage computation.
    std::unordered_map<char32_t, int64_t> char_freq;
    int64_t char_total = 0;
    for (const auto& [w, f] : word_freq) {
        for (char32_t cp : uni::decode_utf8(w, true)) {
            char_freq[cp] += f;
            char_total += f;
        }
    }

    std::vector<std::pair<char32_t, int64_t>> by_freq(char_freq.begin(), char_freq.end());
    std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<char32_t> alphabet;
    alphabet.push_back(marker);
    int64_t cum = 0;
    for (const auto& [cp, f] : by_freq) {
        if (static_cast<double>(cum) >= config.character_coverage * static_cast<double>(char_total))
            break;
        cum += f;
        alphabet.push_back(cp);
    }
    std::sort(alphabet.begin(), alphabet.end());
    alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());

    std::vector<Piece> pieces;
    pieces.push_back({"<unk>", 0.0, PieceKind::unknown});
    pieces.push_back({"<s>", 0.0, PieceKind::special});
    pieces.push_back({"</s>", 0.0, PieceKind::special});
    std::unordered_map<std::string, int32_t> index;
    std::unordered_map<char32_t, int32_t> char_to_id;
    for (char32_t cp : alphabet) {
        std::string t;
        uni::append_utf8(t, cp);
        char_to_id[cp] = static_cast<int32_t>(pieces.size());
        index[t] = static_cast<int32_t>(pieces.size());
        pieces.push_back({t, 0.0, PieceKind::normal});
    }
    index["<unk>"] = 0;
    index["<s>"] = 1;
    index["</s>"] = 2;

    if (config.target_vocab_size < static_cast<int32_t>(pieces.size()))
        throw DataError("target_vocab_size " + std::to_string(config.target_vocab_size) +
                        " below alphabet plus specials (" + std::to_string(pieces.size()) + ")");

    std::vector<int> piece_chars(pieces.size(), 1); // codepoint length per piece

    std::vector<TrainWord> words;
    words.reserve(word_freq.size());
    {
        // Deterministic word order (used only for stable word indices).
        std::vector<std::pair<std::string, int64_t>> sorted(word_freq.begin(), word_freq.end());
        std::sort(sorted.begin(), sorted.end());
        for (auto& [w, f] : sorted) {
            TrainWord tw;
            tw.freq = f;
            tw.syms.push_back(char_to_id[marker]);
            for (char32_t cp : uni::decode_utf8(w, true)) {
                auto it = char_to_id.find(cp);
                tw.syms.push_back(it == char_to_id.end() ? -1 : it->second);
            }
            words.push_back(std::move(tw));
        }
    }

    std::unordered_map<PairKey, PairStat, PairKeyHash> stats;
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapLess> heap;

    auto pair_eligible = [&](int32_t l, int32_t r) {
        return piece_chars[static_cast<std::size_t>(l)] + piece_chars[static_cast<std::size_t>(r)] <=
               config.max_piece_chars;
    };
    auto push_pair = [&](int32_t l, int32_t r, int64_t count) {
        if (count >= 2 && pair_eligible(l, r))
            heap.push({count, pieces[static_cast<std::size_t>(l)].text +
                                  pieces[static_cast<std::size_t>(r)].text,
                       l, r});
    };

    auto remove_word_counts = [&](int32_t wi, std::vector<PairKey>& touched) {
        const TrainWord& w = words[static_cast<std::size_t>(wi)];
        for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
            int32_t l = w.syms[i], r = w.syms[i + 1];
            if (l < 0 || r < 0) continue;
            PairKey k{l, r};
            auto it = stats.find(k);
            if (it == stats.end()) continue;
            it->second.count -= w.freq;
            touched.push_back(k);
        }
        for (const PairKey& k : touched) {
            auto it = stats.find(k);
            if (it != stats.end()) it->second.words.erase(wi);
        }
    };
    auto add_word_counts = [&](int32_t wi, std::vector<PairKey>& touched) {
        const TrainWord& w = words[static_cast<std::size_t>(wi)];
        for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
            int32_t l = w.syms[i], r = w.syms[i + 1];
            if (l < 0 || r < 0) continue;
            PairKey k{l, r};
            PairStat& st = stats[k];
            st.count += w.freq;
            st.words.insert(wi);
            touched.push_back(k);
        }
    };

    for (std::size_t wi = 0; wi < words.size(); ++wi) {
        std::vector<PairKey> touched;
        add_word_counts(static_cast<int32_t>(wi), touched);
    }
    for (const auto& [k, st] : stats) push_pair(k.left, k.right, st.count);

    int64_t merge_rank = 0;
    while (static_cast<int32_t>(pieces.size()) < config.target_vocab_size) {
        // Pop until an entry matches the live count for its pair.
        PairKey best{-1, -1};
        while (!heap.empty()) {
            HeapEntry e = heap.top();
            auto it = stats.find(PairKey{e.left, e.right});
            if (it == stats.end() || it->second.count != e.count || e.count < 2) {
                heap.pop();
                continue;
            }
            best = PairKey{e.left, e.right};
            heap.pop();
            break;
        }
        if (best.left < 0) break;

        const std::string merged = pieces[static_cast<std::size_t>(best.left)].text +
                                   pieces[static_cast<std::size_t>(best.right)].text;
        int32_t merged_id;
        auto existing = index.find(merged);
        if (existing != index.end()) {
            merged_id = existing->second; // same surface string reached by another path
        } else {
            merged_id = static_cast<int32_t>(pieces.size());
            ++merge_rank;
            pieces.push_back({merged, -static_cast<double>(merge_rank), PieceKind::normal});
            piece_chars.push_back(piece_chars[static_cast<std::size_t>(best.left)] +
                                  piece_chars[static_cast<std::size_t>(best.right)]);
            index[merged] = merged_id;
        }

        std::vector<int32_t> affected(stats[best].words.begin(), stats[best].words.end());
        std::sort(affected.begin(), affected.end());
        std::vector<PairKey> touched;
        for (int32_t wi : affected) {
            touched.clear();
            remove_word_counts(wi, touched);
            TrainWord& w = words[static_cast<std::size_t>(wi)];
            std::vector<int32_t> out;
            out.reserve(w.syms.size());
            for (std::size_t i = 0; i < w.syms.size();) {
                if (i + 1 < w.syms.size() && w.syms[i] == best.left && w.syms[i + 1] == best.right) {
                    out.push_back(merged_id);
                    i += 2;
                } else {
                    out.push_back(w.syms[i]);
                    i += 1;
                }
            }
            w.syms = std::move(out);
            add_word_counts(wi, touched);
            std::sort(touched.begin(), touched.end(), [](const PairKey& a, const PairKey& b) {
                return a.left != b.left ? a.left < b.left : a.right < b.right;
            });
            touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
            for (const PairKey& k : touched) {
                auto it = stats.find(k);
                if (it == stats.end()) continue;
                if (it->second.count <= 0) {
                    stats.erase(it);
                    continue;
                }
                push_pair(k.left, k.right, it->second.count);
            }
        }
        stats.erase(best);
    }

    return TokenizerModel::make(std::move(pieces), marker, 0, 1, 2);
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

std::vector<int32_t> encode(const TokenizerModel& model, std::string_view text) {
    std::vector<int32_t> out;
    std::string marker_text;
    uni::append_utf8(marker_text, model.boundary_marker());

    for (const std::string& word : uni::split_whitespace(text)) {
        std::vector<int32_t> syms;
        syms.push_back(model.find_piece(marker_text));
        for (char32_t cp : uni::decode_utf8(word, true)) {
            std::string t;
            uni::append_utf8(t, cp);
            syms.push_back(model.find_piece(t));
        }

        // Greedy merge: best candidate by (score desc, id asc, position asc).
        while (true) {
            int best_pos = -1;
            int32_t best_id = -1;
            double best_score = 0.0;
            for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
                if (syms[i] < 0 || syms[i + 1] < 0) continue;
                const std::string cand = model.piece(syms[i]).text + model.piece(syms[i + 1]).text;
                int32_t id = model.find_piece(cand);
                if (id < 0) continue;
                double score = model.piece(id).score;
                if (best_pos < 0 || score > best_score || (score == best_score && id < best_id)) {
                    best_pos = static_cast<int>(i);
                    best_id = id;
                    best_score = score;
                }
            }
            if (best_pos < 0) break;
            syms[static_cast<std::size_t>(best_pos)] = best_id;
            syms.erase(syms.begin() + best_pos + 1);
        }

        for (int32_t s : syms) out.push_back(s < 0 ? model.unk_id() : s);
    }
    return out;
}

std::string decode(const TokenizerModel& model, const std::vector<int32_t>& ids) {
    std::string out;
    for (int32_t id : ids) {
        if (id < 0 || id >= model.vocab_size())
            throw DataError("token id out of range: " + std::to_string(id));
        const Piece& p = model.piece(id);
        if (p.kind == PieceKind::unknown) {
            uni::append_utf8(out, uni::kReplacementChar);
            continue;
        }
        if (p.kind == PieceKind::special) continue;
        for (char32_t cp : uni::decode_utf8(p.text))
            uni::append_utf8(out, cp == model.boundary_marker() ? U' ' : cp);
    }
    if (!out.empty() && out.front() == ' ') out.erase(out.begin());
    return out;
}

int64_t count_tokens(const TokenizerModel& model, std::string_view text) {
    return static_cast<int64_t>(encode(model, text).size());
}

} // namespace cabrita
