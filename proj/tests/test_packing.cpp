#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <random>
#include <vector>

#include "cabrita/error.hpp"
#include "cabrita/packing.hpp"
#include "support/test_util.hpp"

using cabrita::DataError;
using cabrita::FormatError;
using cabrita::PackedSequences;
using cabrita::PackStats;
namespace ct = cabrita::testing;

namespace {

constexpr uint32_t kBos = 1;
constexpr uint32_t kEos = 2;

std::vector<uint32_t> doc_of(std::size_t len, uint32_t fill = 7) {
    return std::vector<uint32_t>(len, fill);
}

} // namespace

TEST_CASE("packing the (5, 9) documents into blocks of 8") {
    // Wrapped lengths 7 and 11 concatenate to 18 tokens: two full blocks,
    // two dropped.
    PackedSequences packed = cabrita::pack({doc_of(5), doc_of(9)}, 8, kBos, kEos);
    CHECK(packed.seq_len == 8);
    REQUIRE(packed.sequences.size() == 2);
    CHECK(packed.dropped_tail == 2);
    CHECK(packed.doc_count == 2);
    for (const auto& seq : packed.sequences) CHECK(seq.size() == 8);

    // Stream layout: bos, 5x7, eos, bos | 9x7 over the boundary, eos dropped.
    CHECK(packed.sequences[0][0] == kBos);
    CHECK(packed.sequences[0][6] == kEos);
    CHECK(packed.sequences[0][7] == kBos);

    PackStats stats = cabrita::unpack_check(packed, kBos, kEos);
    CHECK(stats.bos_count == 2);
    CHECK(stats.eos_count == 1);
    CHECK(stats.emitted_tokens == 16);
    // First sequence holds two document starts, second none.
    CHECK(stats.docs_per_sequence.at(2) == 1);
    CHECK(stats.docs_per_sequence.at(0) == 1);
}

TEST_CASE("empty doc list packs to nothing") {
    PackedSequences packed = cabrita::pack({}, 8, kBos, kEos);
    CHECK(packed.sequences.empty());
    CHECK(packed.dropped_tail == 0);
    CHECK(packed.doc_count == 0);

    PackStats stats = cabrita::unpack_check(packed, kBos, kEos);
    CHECK(stats.bos_count == 0);
    CHECK(stats.eos_count == 0);
    CHECK(stats.emitted_tokens == 0);
    CHECK(stats.docs_per_sequence.empty());
}

TEST_CASE("seq_len below 3 is rejected") {
    CHECK_THROWS_AS(cabrita::pack({doc_of(4)}, 2, kBos, kEos), DataError);
}

TEST_CASE("conservation identity holds exactly on 1000 random docs") {
    std::mt19937_64 rng(101);
    std::vector<std::vector<uint32_t>> docs;
    int64_t wrapped_total = 0;
    for (int i = 0; i < 1000; ++i) {
        std::size_t len = rng() % 400;
        docs.push_back(doc_of(len, static_cast<uint32_t>(3 + rng() % 1000)));
        wrapped_total += static_cast<int64_t>(len) + 2;
    }
    const int32_t seq_len = 2048;
    PackedSequences packed = cabrita::pack(docs, seq_len, kBos, kEos);

    int64_t emitted = static_cast<int64_t>(packed.sequences.size()) * seq_len;
    CHECK(emitted + packed.dropped_tail == wrapped_total);
    CHECK(packed.dropped_tail < seq_len);
    CHECK(packed.doc_count == 1000);

    PackStats stats = cabrita::unpack_check(packed, kBos, kEos);
    CHECK(stats.emitted_tokens == emitted);
    CHECK(stats.bos_count <= packed.doc_count);
    int64_t histogram_total = 0;
    for (const auto& [starts, count] : stats.docs_per_sequence) {
        (void)starts;
        histogram_total += count;
    }
    CHECK(histogram_total == static_cast<int64_t>(packed.sequences.size()));
}

TEST_CASE("packing is deterministic and order-preserving") {
    std::vector<std::vector<uint32_t>> docs = {{10, 11, 12}, {20}, {30, 31}};
    PackedSequences a = cabrita::pack(docs, 4, kBos, kEos);
    PackedSequences b = cabrita::pack(docs, 4, kBos, kEos);
    CHECK(a == b);
    // Stream: 1,10,11,12 | 2,1,20,2 | 1,30,31,2
    REQUIRE(a.sequences.size() == 3);
    CHECK(a.sequences[0] == std::vector<uint32_t>{kBos, 10, 11, 12});
    CHECK(a.sequences[1] == std::vector<uint32_t>{kEos, kBos, 20, kEos});
    CHECK(a.sequences[2] == std::vector<uint32_t>{kBos, 30, 31, kEos});
    CHECK(a.dropped_tail == 0);
}

TEST_CASE("pad_final completes the tail instead of dropping it") {
    PackedSequences packed = cabrita::pack({doc_of(5), doc_of(9)}, 8, kBos, kEos, true, 0);
    REQUIRE(packed.sequences.size() == 3);
    CHECK(packed.dropped_tail == 0);
    // Tail block: one real token, the final eos, then pads.
    CHECK(packed.sequences[2][1] == kEos);
    for (std::size_t i = 2; i < 8; ++i) CHECK(packed.sequences[2][i] == 0);
}

TEST_CASE("binary save and load round trip") {
    ct::TempDir dir("packing_io");
    std::mt19937_64 rng(55);
    std::vector<std::vector<uint32_t>> docs;
    for (int i = 0; i < 40; ++i) {
        std::vector<uint32_t> d;
        for (std::size_t j = 0; j < rng() % 60; ++j)
            d.push_back(static_cast<uint32_t>(rng() % 50000));
        docs.push_back(std::move(d));
    }
    PackedSequences packed = cabrita::pack(docs, 32, kBos, kEos);
    std::string path = dir.file("packed.bin");
    cabrita::save_packed(packed, path);

    PackedSequences loaded = cabrita::load_packed(path);
    CHECK(loaded == packed);

    // The sidecar is plain JSON with the four metadata fields.
    std::string sidecar = ct::read_text_file(path + ".json");
    CHECK(sidecar.find("seq_len") != std::string::npos);
    CHECK(sidecar.find("n_sequences") != std::string::npos);
    CHECK(sidecar.find("dropped_tail") != std::string::npos);
    CHECK(sidecar.find("doc_count") != std::string::npos);
}

TEST_CASE("load rejects truncated or inconsistent files") {
    ct::TempDir dir("packing_errors");
    PackedSequences packed = cabrita::pack({doc_of(5), doc_of(9)}, 8, kBos, kEos);
    std::string path = dir.file("packed.bin");
    cabrita::save_packed(packed, path);

    // Truncate the payload by four bytes.
    std::string bytes = ct::read_text_file(path);
    ct::write_text_file(path, bytes.substr(0, bytes.size() - 4));
    CHECK_THROWS_AS(cabrita::load_packed(path), FormatError);

    // Extend it again past the declared size.
    ct::write_text_file(path, bytes + std::string(4, '\0'));
    CHECK_THROWS_AS(cabrita::load_packed(path), FormatError);

    // Break the sidecar.
    ct::write_text_file(path, bytes);
    ct::write_text_file(path + ".json", "{\"seq_len\": 8}");
    CHECK_THROWS_AS(cabrita::load_packed(path), FormatError);

    // Missing files are data errors.
    CHECK_THROWS_AS(cabrita::load_packed(dir.file("missing.bin")), DataError);
}
