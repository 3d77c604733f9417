#include "cabrita/packing.hpp"

#include <fstream>

#include <json.hpp>

#include "cabrita/error.hpp"

namespace cabrita {

using json = nlohmann::json;

PackedSequences pack(const std::vector<std::vector<uint32_t>>& docs, int32_t seq_len,
                     uint32_t bos_id, uint32_t eos_id, bool pad_final, uint32_t pad_id) {
    if (seq_len < 3) throw DataError("seq_len must be at least 3");

    PackedSequences out;
    out.seq_len = seq_len;
    out.doc_count = static_cast<int64_t>(docs.size());

    std::vector<uint32_t> block;
    block.reserve(static_cast<std::size_t>(seq_len));
    auto push = [&](uint32_t id) {
        block.push_back(id);
        if (block.size() == static_cast<std::size_t>(seq_len)) {
            out.sequences.push_back(block);
            block.clear();
        }
    };
    for (const std::vector<uint32_t>& doc : docs) {
        push(bos_id);
        for (uint32_t id : doc) push(id);
        push(eos_id);
    }
    if (!block.empty()) {
        if (pad_final) {
            while (block.size() < static_cast<std::size_t>(seq_len)) block.push_back(pad_id);
            out.sequences.push_back(block);
        } else {
            out.dropped_tail = static_cast<int64_t>(block.size());
        }
    }
    return out;
}

PackStats unpack_check(const PackedSequences& packed, uint32_t bos_id, uint32_t eos_id) {
    PackStats stats;
    for (const std::vector<uint32_t>& seq : packed.sequences) {
        int64_t starts = 0;
        for (uint32_t id : seq) {
            if (id == bos_id) {
                ++stats.bos_count;
                ++starts;
            }
            if (id == eos_id) ++stats.eos_count;
        }
        stats.emitted_tokens += static_cast<int64_t>(seq.size());
        stats.docs_per_sequence[starts] += 1;
    }
    return stats;
}

void save_packed(const PackedSequences& packed, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    for (const std::vector<uint32_t>& seq : packed.sequences) {
        for (uint32_t id : seq) {
            unsigned char bytes[4] = {static_cast<unsigned char>(id & 0xFF),
                                      static_cast<unsigned char>((id >> 8) & 0xFF),
                                      static_cast<unsigned char>((id >> 16) & 0xFF),
                                      static_cast<unsigned char>((id >> 24) & 0xFF)};
            f.write(reinterpret_cast<const char*>(bytes), 4);
        }
    }
    if (!f) throw DataError("write failed: " + path);
    f.close();

    json sidecar = {{"seq_len", packed.seq_len},
                    {"n_sequences", static_cast<int64_t>(packed.sequences.size())},
                    {"dropped_tail", packed.dropped_tail},
                    {"doc_count", packed.doc_count}};
    std::ofstream side(path + ".json");
    if (!side) throw DataError("cannot open for writing: " + path + ".json");
    side << sidecar.dump(2) << '\n';
    if (!side) throw DataError("write failed: " + path + ".json");
}

PackedSequences load_packed(const std::string& path) {
    std::ifstream side_f(path + ".json");
    if (!side_f) throw DataError("cannot open: " + path + ".json");
    json sidecar;
    try {
        side_f >> sidecar;
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("bad sidecar: ") + e.what());
    }
    for (const char* key : {"seq_len", "n_sequences", "dropped_tail", "doc_count"})
        if (!sidecar.contains(key) || !sidecar[key].is_number_integer())
            throw FormatError(std::string("sidecar missing integer field: ") + key);

    PackedSequences out;
    out.seq_len = sidecar["seq_len"].get<int32_t>();
    out.dropped_tail = sidecar["dropped_tail"].get<int64_t>();
    out.doc_count = sidecar["doc_count"].get<int64_t>();
    const int64_t n_sequences = sidecar["n_sequences"].get<int64_t>();
    if (out.seq_len < 3 || n_sequences < 0) throw FormatError("sidecar values out of range");

    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    f.seekg(0, std::ios::end);
    const int64_t file_size = static_cast<int64_t>(f.tellg());
    f.seekg(0, std::ios::beg);
    const int64_t expected = n_sequences * out.seq_len * 4;
    if (file_size != expected)
        throw FormatError("packed file is " + std::to_string(file_size) + " bytes, expected " +
                          std::to_string(expected));

    out.sequences.resize(static_cast<std::size_t>(n_sequences));
    std::vector<unsigned char> row(static_cast<std::size_t>(out.seq_len) * 4);
    for (std::vector<uint32_t>& seq : out.sequences) {
        f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!f) throw FormatError("truncated packed file: " + path);
        seq.resize(static_cast<std::size_t>(out.seq_len));
        for (std::size_t i = 0; i < seq.size(); ++i) {
            seq[i] = static_cast<uint32_t>(row[4 * i]) | (static_cast<uint32_t>(row[4 * i + 1]) << 8) |
                     (static_cast<uint32_t>(row[4 * i + 2]) << 16) |
                     (static_cast<uint32_t>(row[4 * i + 3]) << 24);
        }
    }
    return out;
}

} // namespace cabrita
