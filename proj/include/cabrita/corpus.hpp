#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace cabrita {

struct Document {
    std::string doc_id;
    std::string text; // normalized UTF-8
    int32_t shard_id = 0;
};

// Per-document verdicts of the low-quality filters. A document is kept only
// when no filter fires; the counts overlap on purpose.
struct FilterOutcome {
    std::string doc_id;
    bool unique_tokens_lt_200 = false;
    bool words_lt_50 = false;
    bool words_gt_100000 = false;
    bool words_outside_50_100000 = false; // == words_lt_50 || words_gt_100000
    bool alpha_word_ratio_lt_80 = false;
    bool ellipsis_lines_gt_30 = false;
    bool mean_word_len_outside_3_10 = false;
    bool stopwords_lt_2 = false;
    bool symbol_ratio_gt_0_1 = false;
    bool bullet_lines_gt_90 = false;
    bool keep = true;

    bool any() const {
        return unique_tokens_lt_200 || words_outside_50_100000 || alpha_word_ratio_lt_80 ||
               ellipsis_lines_gt_30 || mean_word_len_outside_3_10 || stopwords_lt_2 ||
               symbol_ratio_gt_0_1 || bullet_lines_gt_90;
    }
};

// Corpus-level accounting with shard extrapolation. Filters count
// independently, so one document may appear in several rows.
struct FilterReport {
    int64_t total_examples = 0;
    int64_t kept = 0;
    int64_t at_least_one = 0;
    int64_t unique_tokens_lt_200 = 0;
    int64_t words_outside_50_100000 = 0;
    int64_t words_lt_50 = 0;
    int64_t words_gt_100000 = 0;
    int64_t alpha_word_ratio_lt_80 = 0;
    int64_t ellipsis_lines_gt_30 = 0;
    int64_t mean_word_len_outside_3_10 = 0;
    int64_t stopwords_lt_2 = 0;
    int64_t symbol_ratio_gt_0_1 = 0;
    int64_t bullet_lines_gt_90 = 0;
    int32_t shards_processed = 0;
    int32_t total_shards = 0;

    void add(const FilterOutcome& o);
    void merge(const FilterReport& other);
    bool operator==(const FilterReport&) const = default;
};

// count / total * 100, rounded to two decimals.
double report_percentage(int64_t count, int64_t total);

// round(count * total_shards / shards_processed)
int64_t extrapolate_count(int64_t count, int32_t shards_processed, int32_t total_shards);

// NFC normalization, CRLF -> LF, control characters other than LF and TAB
// stripped. Input must be valid UTF-8.
std::string normalize(std::string_view text);

// Runs of Unicode whitespace; no empty entries.
std::vector<std::string> split_words(std::string_view text);

using StopwordSet = std::unordered_set<std::string>;

StopwordSet load_stopwords(const std::string& path);
StopwordSet make_stopword_set(const std::vector<std::string>& words);

// Evaluates all filters on an already-normalized document.
FilterOutcome evaluate_quality_filters(const Document& doc, const StopwordSet& stopwords);

struct PipelineOptions {
    std::vector<std::string> shard_paths; // .jsonl or .jsonl.gz, processed in order
    std::string output_dir;               // empty: kept documents are not written
    int32_t total_shards = 0;             // 0: defaults to shard_paths.size()
    int threads = 1;
};

struct PipelineResult {
    FilterReport report;
    std::vector<std::string> output_files;
};

// Streams NDJSON shards through normalize + filters. Kept documents are
// re-emitted in input order, one output file per shard, text field
// normalized. Callback, when set, sees every kept document in order.
PipelineResult run_pipeline(const PipelineOptions& options, const StopwordSet& stopwords,
                            const std::function<void(const Document&)>& on_kept = nullptr);

std::string render_report_table(const FilterReport& report);
std::string render_report_json(const FilterReport& report);

} // namespace cabrita
