#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "cabrita/corpus.hpp"
#include "cabrita/error.hpp"
#include "support/filter_corpus.hpp"
#include "support/test_util.hpp"

using cabrita::DataError;
using cabrita::Document;
using cabrita::FilterOutcome;
using cabrita::FilterReport;
using cabrita::FormatError;
using cabrita::StopwordSet;
namespace ct = cabrita::testing;
using ct::corpus_as_ndjson;
using ct::crafted_corpus;
using ct::good_text;

namespace {

StopwordSet test_stopwords() { return cabrita::load_stopwords(ct::data_path("stopwords_pt.txt")); }

FilterOutcome evaluate(const std::string& text, const StopwordSet& stopwords) {
    Document doc;
    doc.doc_id = "test";
    doc.text = text;
    return cabrita::evaluate_quality_filters(doc, stopwords);
}

void write_gzip(const std::string& path, const std::string& content) {
    gzFile gz = gzopen(path.c_str(), "wb");
    REQUIRE(gz != nullptr);
    int written = gzwrite(gz, content.data(), static_cast<unsigned>(content.size()));
    REQUIRE(written == static_cast<int>(content.size()));
    gzclose(gz);
}

} // namespace

TEST_CASE("report arithmetic reproduces the reference corpus numbers") {
    // 361,732 of 1,652,725 examples tripped at least one filter: 21.89%,
    // extrapolated from 10 of 1,024 shards to 37,041,357.
    CHECK(cabrita::report_percentage(361732, 1652725) == doctest::Approx(21.89).epsilon(1e-12));
    CHECK(cabrita::extrapolate_count(361732, 10, 1024) == 37041357);

    CHECK(cabrita::report_percentage(1, 3) == doctest::Approx(33.33).epsilon(1e-12));
    CHECK(cabrita::report_percentage(0, 5) == 0.0);
    CHECK(cabrita::extrapolate_count(5, 2, 2) == 5);
    CHECK(cabrita::extrapolate_count(3, 2, 3) == 5); // 4.5 rounds away from zero
}

TEST_CASE("normalize canonicalizes line endings, controls, and composition") {
    CHECK(cabrita::normalize("a\r\nb") == "a\nb");
    CHECK(cabrita::normalize("a\rb") == "ab");
    CHECK(cabrita::normalize("a\x07z") == "az");
    CHECK(cabrita::normalize("a\tb\nc") == "a\tb\nc");
    // e + combining acute composes to U+00E9.
    CHECK(cabrita::normalize("caf\x65\xCC\x81") == "café");
    CHECK_THROWS_AS(cabrita::normalize("bad\x80""byte"), DataError);
}

TEST_CASE("stopword matching lowercases and strips edge punctuation") {
    StopwordSet stopwords = test_stopwords();
    CHECK(stopwords.count("de") == 1);
    CHECK(stopwords.count("a") == 1);
    CHECK(stopwords.count("não") == 1);

    // Two stopword occurrences via punctuation-wrapped, capitalized forms.
    FilterOutcome o = evaluate(good_text(), stopwords);
    CHECK_FALSE(o.stopwords_lt_2);
    FilterOutcome wrapped = evaluate("(De) «nÃo!»", stopwords);
    CHECK_FALSE(wrapped.stopwords_lt_2);
    FilterOutcome none = evaluate("gold house", stopwords);
    CHECK(none.stopwords_lt_2);
}

TEST_CASE("individual filter predicates fire exactly as labeled") {
    StopwordSet stopwords = test_stopwords();
    std::vector<std::string> docs = crafted_corpus();
    REQUIRE(docs.size() == 12);

    FilterOutcome good = evaluate(docs[0], stopwords);
    CHECK(good.keep);
    CHECK_FALSE(good.any());

    FilterOutcome tiny_pt = evaluate(docs[1], stopwords);
    CHECK(tiny_pt.unique_tokens_lt_200);
    CHECK(tiny_pt.words_lt_50);
    CHECK(tiny_pt.words_outside_50_100000);
    CHECK_FALSE(tiny_pt.stopwords_lt_2);
    CHECK_FALSE(tiny_pt.mean_word_len_outside_3_10);
    CHECK_FALSE(tiny_pt.keep);

    FilterOutcome tiny_en = evaluate(docs[2], stopwords);
    CHECK(tiny_en.stopwords_lt_2);
    CHECK(tiny_en.words_lt_50);

    FilterOutcome tiny_ellipsis = evaluate(docs[3], stopwords);
    CHECK(tiny_ellipsis.ellipsis_lines_gt_30);
    CHECK(tiny_ellipsis.symbol_ratio_gt_0_1);
    CHECK(tiny_ellipsis.stopwords_lt_2);

    FilterOutcome no_stop = evaluate(docs[4], stopwords);
    CHECK(no_stop.stopwords_lt_2);
    CHECK_FALSE(no_stop.mean_word_len_outside_3_10); // mean exactly 10.0
    CHECK_FALSE(no_stop.unique_tokens_lt_200);

    FilterOutcome long_words = evaluate(docs[5], stopwords);
    CHECK(long_words.mean_word_len_outside_3_10);
    CHECK_FALSE(long_words.any() != long_words.mean_word_len_outside_3_10); // only flag

    FilterOutcome short_words = evaluate(docs[6], stopwords);
    CHECK(short_words.mean_word_len_outside_3_10);
    CHECK_FALSE(short_words.stopwords_lt_2);

    FilterOutcome numeric = evaluate(docs[7], stopwords);
    CHECK(numeric.alpha_word_ratio_lt_80);
    CHECK_FALSE(numeric.mean_word_len_outside_3_10);

    FilterOutcome dotted = evaluate(docs[8], stopwords);
    CHECK(dotted.ellipsis_lines_gt_30);
    CHECK_FALSE(dotted.symbol_ratio_gt_0_1);

    FilterOutcome hashes = evaluate(docs[9], stopwords);
    CHECK(hashes.symbol_ratio_gt_0_1);
    CHECK_FALSE(hashes.alpha_word_ratio_lt_80);

    FilterOutcome bullets = evaluate(docs[10], stopwords);
    CHECK(bullets.bullet_lines_gt_90);
    CHECK_FALSE(bullets.symbol_ratio_gt_0_1);

    FilterOutcome giant = evaluate(docs[11], stopwords);
    CHECK(giant.words_gt_100000);
    CHECK(giant.words_outside_50_100000);
    CHECK_FALSE(giant.words_lt_50);
    CHECK_FALSE(giant.unique_tokens_lt_200);
}

TEST_CASE("ellipsis and bullet line edges") {
    StopwordSet stopwords = test_stopwords();
    // Unicode ellipsis and trailing spaces count; blank lines are ignored.
    FilterOutcome o = evaluate("fim da linha…  \n\n   \ncurta de", stopwords);
    CHECK(o.ellipsis_lines_gt_30); // 1 of 2 non-empty lines

    // Left-indented bullets still count.
    FilterOutcome b = evaluate("   * um de\n * dois de\n\t* tres de", stopwords);
    CHECK(b.bullet_lines_gt_90);

    // A document with no line body at all leaves line filters unflagged.
    FilterOutcome empty = evaluate("", stopwords);
    CHECK_FALSE(empty.ellipsis_lines_gt_30);
    CHECK_FALSE(empty.bullet_lines_gt_90);
    CHECK_FALSE(empty.alpha_word_ratio_lt_80);
    CHECK_FALSE(empty.mean_word_len_outside_3_10);
    CHECK(empty.words_lt_50);
    CHECK(empty.unique_tokens_lt_200);
}

TEST_CASE("pipeline over the crafted corpus reproduces the hand counts") {
    StopwordSet stopwords = test_stopwords();
    ct::TempDir dir("corpus_pipeline");
    std::vector<std::string> docs = crafted_corpus();
    ct::write_text_file(dir.file("shard_000.jsonl"), corpus_as_ndjson(docs));

    cabrita::PipelineOptions options;
    options.shard_paths = {dir.file("shard_000.jsonl")};
    options.output_dir = dir.file("out");
    std::vector<std::string> kept_ids;
    cabrita::PipelineResult result = cabrita::run_pipeline(
        options, stopwords, [&](const Document& d) { kept_ids.push_back(d.doc_id); });

    const FilterReport& r = result.report;
    CHECK(r.total_examples == 12);
    CHECK(r.kept == 1);
    CHECK(r.at_least_one == 11);
    CHECK(r.unique_tokens_lt_200 == 3);
    CHECK(r.words_outside_50_100000 == 4);
    CHECK(r.words_lt_50 == 3);
    CHECK(r.words_gt_100000 == 1);
    CHECK(r.alpha_word_ratio_lt_80 == 1);
    CHECK(r.ellipsis_lines_gt_30 == 2);
    CHECK(r.mean_word_len_outside_3_10 == 2);
    CHECK(r.stopwords_lt_2 == 3);
    CHECK(r.symbol_ratio_gt_0_1 == 2);
    CHECK(r.bullet_lines_gt_90 == 1);
    CHECK(r.shards_processed == 1);
    CHECK(r.total_shards == 1);

    REQUIRE(kept_ids.size() == 1);
    CHECK(kept_ids[0] == "doc-0");

    // The kept document is re-emitted, normalized, one per line.
    REQUIRE(result.output_files.size() == 1);
    std::string cleaned = ct::read_text_file(result.output_files[0]);
    nlohmann::json obj = nlohmann::json::parse(cleaned);
    CHECK(obj["id"] == "doc-0");
    CHECK(obj["text"] == docs[0]);
}

TEST_CASE("pipeline is deterministic across worker counts") {
    StopwordSet stopwords = test_stopwords();
    ct::TempDir dir("corpus_threads");
    std::vector<std::string> docs = crafted_corpus();
    // Four shards with rotated content so each shard differs.
    std::vector<std::string> shards;
    for (int s = 0; s < 4; ++s) {
        std::vector<std::string> rotated;
        for (std::size_t i = 0; i < docs.size(); ++i)
            rotated.push_back(docs[(i + static_cast<std::size_t>(s)) % docs.size()]);
        std::string path = dir.file("shard_" + std::to_string(s) + ".jsonl");
        ct::write_text_file(path, corpus_as_ndjson(rotated));
        shards.push_back(path);
    }

    auto run_with_threads = [&](int threads, const std::string& out_name) {
        cabrita::PipelineOptions options;
        options.shard_paths = shards;
        options.output_dir = dir.file(out_name);
        options.threads = threads;
        return cabrita::run_pipeline(options, stopwords);
    };
    cabrita::PipelineResult one = run_with_threads(1, "out1");
    cabrita::PipelineResult eight = run_with_threads(8, "out8");

    CHECK(one.report == eight.report);
    CHECK(one.report.total_examples == 48);
    CHECK(one.report.kept == 4);
    REQUIRE(one.output_files.size() == eight.output_files.size());
    for (std::size_t i = 0; i < one.output_files.size(); ++i) {
        CHECK(ct::read_text_file(one.output_files[i]) ==
              ct::read_text_file(eight.output_files[i]));
    }
}

TEST_CASE("pipeline reads gzip shards") {
    StopwordSet stopwords = test_stopwords();
    ct::TempDir dir("corpus_gzip");
    std::vector<std::string> docs = crafted_corpus();
    docs.resize(4); // keep the gzip shard small
    write_gzip(dir.file("shard_000.jsonl.gz"), corpus_as_ndjson(docs));

    cabrita::PipelineOptions options;
    options.shard_paths = {dir.file("shard_000.jsonl.gz")};
    options.output_dir = dir.file("out");
    cabrita::PipelineResult result = cabrita::run_pipeline(options, stopwords);
    CHECK(result.report.total_examples == 4);
    CHECK(result.report.kept == 1);
    REQUIRE(result.output_files.size() == 1);
    // Output file name loses the .gz and gains the cleaned suffix.
    CHECK(result.output_files[0].find(".gz") == std::string::npos);
    CHECK(result.output_files[0].find("cleaned") != std::string::npos);
}

TEST_CASE("pipeline extrapolates to the full shard count") {
    StopwordSet stopwords = test_stopwords();
    ct::TempDir dir("corpus_extrap");
    std::vector<std::string> docs = crafted_corpus();
    ct::write_text_file(dir.file("shard_000.jsonl"), corpus_as_ndjson(docs));

    cabrita::PipelineOptions options;
    options.shard_paths = {dir.file("shard_000.jsonl")};
    options.total_shards = 1024;
    cabrita::PipelineResult result = cabrita::run_pipeline(options, stopwords);
    CHECK(result.report.total_shards == 1024);
    CHECK(result.report.shards_processed == 1);
    CHECK(result.output_files.empty()); // no output_dir: report only

    std::string json_text = cabrita::render_report_json(result.report);
    nlohmann::json parsed = nlohmann::json::parse(json_text);
    CHECK(parsed["total_examples"] == 12);
    CHECK(parsed["shards_processed"] == 1);
    CHECK(parsed["total_shards"] == 1024);
    CHECK(parsed["at_least_one"]["count"] == 11);
    CHECK(parsed["at_least_one"]["extrapolated"] == 11 * 1024);
    CHECK(parsed["filters"]["unique_tokens_lt_200"]["count"] == 3);
    CHECK(parsed["filters"]["stopwords_lt_2"]["extrapolated"] == 3 * 1024);

    std::string table = cabrita::render_report_table(result.report);
    CHECK(table.find("Total examples") != std::string::npos);
    CHECK(table.find("bad example filter") != std::string::npos);
    CHECK(table.find("Less than 200 unique tokens") != std::string::npos);
    CHECK(table.find("91.67") != std::string::npos); // 11/12 as a percentage
    CHECK(table.find("11,264") != std::string::npos); // 11 * 1024 extrapolated
}

TEST_CASE("pipeline rejects malformed shards with location info") {
    StopwordSet stopwords = test_stopwords();
    ct::TempDir dir("corpus_errors");

    ct::write_text_file(dir.file("bad.jsonl"), "{\"text\": \"ok doc\"}\nnot json at all\n");
    cabrita::PipelineOptions options;
    options.shard_paths = {dir.file("bad.jsonl")};
    CHECK_THROWS_WITH_AS(cabrita::run_pipeline(options, stopwords),
                         doctest::Contains("line 2"), FormatError);

    ct::write_text_file(dir.file("no_text.jsonl"), "{\"id\": \"x\"}\n");
    options.shard_paths = {dir.file("no_text.jsonl")};
    CHECK_THROWS_AS(cabrita::run_pipeline(options, stopwords), FormatError);

    options.shard_paths = {dir.file("missing.jsonl")};
    CHECK_THROWS_AS(cabrita::run_pipeline(options, stopwords), DataError);

    // Invalid UTF-8 inside a text field is a data error from normalize.
    ct::write_text_file(dir.file("bad_utf8.jsonl"), "{\"text\": \"a\\udc80b\"}\n");
    options.shard_paths = {dir.file("bad_utf8.jsonl")};
    CHECK_THROWS(cabrita::run_pipeline(options, stopwords));
}

TEST_CASE("empty pipeline input yields an empty result") {
    StopwordSet stopwords = test_stopwords();
    cabrita::PipelineOptions options;
    cabrita::PipelineResult result = cabrita::run_pipeline(options, stopwords);
    CHECK(result.report.total_examples == 0);
    CHECK(result.output_files.empty());
}

TEST_CASE("stopword loader rejects missing files and skips blanks") {
    ct::TempDir dir("stopwords");
    CHECK_THROWS_AS(cabrita::load_stopwords(dir.file("missing.txt")), DataError);
    ct::write_text_file(dir.file("words.txt"), "de\n\n a \nNÃO\n");
    StopwordSet set = cabrita::load_stopwords(dir.file("words.txt"));
    CHECK(set.count("de") == 1);
    CHECK(set.count("a") == 1);
    // Entries are normalized to lowercase.
    CHECK(set.count("não") == 1);
    CHECK(set.size() == 3);

    // The bundled Portuguese list holds the standard 207 entries.
    StopwordSet bundled = test_stopwords();
    CHECK(bundled.size() == 207);
}
