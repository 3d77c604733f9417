#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cabrita {

// Fixed-length training sequences built from delimited documents.
struct PackedSequences {
    int32_t seq_len = 0;
    std::vector<std::vector<uint32_t>> sequences; // each exactly seq_len long
    int64_t dropped_tail = 0;                     // tokens discarded from the final partial block
    int64_t doc_count = 0;

    bool operator==(const PackedSequences&) const = default;
};

// Wraps every document as [bos] ids [eos], concatenates in order, and chunks
// the stream into consecutive seq_len blocks. The final partial block is
// dropped (counted in dropped_tail) unless pad_final is set, in which case it
// is completed with pad_id and dropped_tail stays 0 for that tail.
// Conservation: seq_len * n_sequences + dropped_tail - pad_count == sum(len+2).
PackedSequences pack(const std::vector<std::vector<uint32_t>>& docs, int32_t seq_len,
                     uint32_t bos_id, uint32_t eos_id, bool pad_final = false,
                     uint32_t pad_id = 0);

struct PackStats {
    int64_t bos_count = 0;
    int64_t eos_count = 0;
    int64_t emitted_tokens = 0;
    // docs-per-sequence histogram keyed by number of document starts (bos) in
    // the sequence.
    std::map<int64_t, int64_t> docs_per_sequence;
};

PackStats unpack_check(const PackedSequences& packed, uint32_t bos_id, uint32_t eos_id);

// Binary format: little-endian u32 ids, row-major [n_sequences x seq_len],
// plus a JSON sidecar (same path + ".json") holding
// {seq_len, n_sequences, dropped_tail, doc_count}.
void save_packed(const PackedSequences& packed, const std::string& path);
PackedSequences load_packed(const std::string& path);

} // namespace cabrita
