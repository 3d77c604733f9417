#include "cabrita/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <zlib.h>

#include "cabrita/error.hpp"
#include "cabrita/unicode.hpp"

namespace cabrita {

namespace uni = cabrita::unicode;
using json = nlohmann::json;
namespace fs = std::filesystem;

void FilterReport::add(const FilterOutcome& o) {
    total_examples += 1;
    kept += o.keep ? 1 : 0;
    at_least_one += o.any() ? 1 : 0;
    unique_tokens_lt_200 += o.unique_tokens_lt_200 ? 1 : 0;
    words_outside_50_100000 += o.words_outside_50_100000 ? 1 : 0;
    words_lt_50 += o.words_lt_50 ? 1 : 0;
    words_gt_100000 += o.words_gt_100000 ? 1 : 0;
    alpha_word_ratio_lt_80 += o.alpha_word_ratio_lt_80 ? 1 : 0;
    ellipsis_lines_gt_30 += o.ellipsis_lines_gt_30 ? 1 : 0;
    mean_word_len_outside_3_10 += o.mean_word_len_outside_3_10 ? 1 : 0;
    stopwords_lt_2 += o.stopwords_lt_2 ? 1 : 0;
    symbol_ratio_gt_0_1 += o.symbol_ratio_gt_0_1 ? 1 : 0;
    bullet_lines_gt_90 += o.bullet_lines_gt_90 ? 1 : 0;
}

void FilterReport::merge(const FilterReport& other) {
    total_examples += other.total_examples;
    kept += other.kept;
    at_least_one += other.at_least_one;
    unique_tokens_lt_200 += other.unique_tokens_lt_200;
    words_outside_50_100000 += other.words_outside_50_100000;
    words_lt_50 += other.words_lt_50;
    words_gt_100000 += other.words_gt_100000;
    alpha_word_ratio_lt_80 += other.alpha_word_ratio_lt_80;
    ellipsis_lines_gt_30 += other.ellipsis_lines_gt_30;
    mean_word_len_outside_3_10 += other.mean_word_len_outside_3_10;
    stopwords_lt_2 += other.stopwords_lt_2;
    symbol_ratio_gt_0_1 += other.symbol_ratio_gt_0_1;
    bullet_lines_gt_90 += other.bullet_lines_gt_90;
}

double report_percentage(int64_t count, int64_t total) {
    if (total == 0) return 0.0;
    double pct = static_cast<double>(count) / static_cast<double>(total) * 100.0;
    return std::round(pct * 100.0) / 100.0;
}

int64_t extrapolate_count(int64_t count, int32_t shards_processed, int32_t total_shards) {
    if (shards_processed <= 0) return 0;
    return std::llround(static_cast<double>(count) * static_cast<double>(total_shards) /
                        static_cast<double>(shards_processed));
}

std::string normalize(std::string_view text) {
    if (!uni::valid_utf8(text)) throw DataError("document is not valid UTF-8");
    std::u32string cps = uni::decode_utf8(text);
    std::u32string cleaned;
    cleaned.reserve(cps.size());
    for (std::size_t i = 0; i < cps.size(); ++i) {
        char32_t cp = cps[i];
        if (cp == U'\r') {
            if (i + 1 < cps.size() && cps[i + 1] == U'\n') continue; // CRLF -> LF
            continue;                                                // bare CR is a control char
        }
        if (uni::is_control(cp) && cp != U'\n' && cp != U'\t') continue;
        cleaned.push_back(cp);
    }
    return uni::encode_utf8(uni::nfc(cleaned));
}

std::vector<std::string> split_words(std::string_view text) {
    return uni::split_whitespace(text);
}

StopwordSet load_stopwords(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open stopword file: " + path);
    StopwordSet set;
    std::string line;
    while (std::getline(f, line)) {
        // Trim ASCII whitespace on both ends and lowercase, so hand-edited
        // lists with stray spacing or capitalization still match.
        std::size_t b = line.find_first_not_of(" \t\r");
        std::size_t e = line.find_last_not_of(" \t\r");
        if (b == std::string::npos) continue;
        std::u32string cps = uni::decode_utf8(line.substr(b, e - b + 1), true);
        for (char32_t& cp : cps) cp = uni::to_lower(cp);
        set.insert(uni::encode_utf8(cps));
    }
    return set;
}

StopwordSet make_stopword_set(const std::vector<std::string>& words) {
    return StopwordSet(words.begin(), words.end());
}

namespace {

bool word_has_alpha(const std::string& w) {
    for (char32_t cp : uni::decode_utf8(w, true))
        if (uni::is_alpha(cp)) return true;
    return false;
}

// Lowercases and strips non-alphanumeric codepoints at both edges, the shape
// stopword lists are written in.
std::string stopword_key(const std::string& w) {
    std::u32string cps = uni::decode_utf8(w, true);
    std::size_t b = 0, e = cps.size();
    auto is_word_char = [](char32_t cp) { return uni::is_alpha(cp) || (cp >= U'0' && cp <= U'9'); };
    while (b < e && !is_word_char(cps[b])) ++b;
    while (e > b && !is_word_char(cps[e - 1])) --e;
    std::u32string trimmed;
    for (std::size_t i = b; i < e; ++i) trimmed.push_back(uni::to_lower(cps[i]));
    return uni::encode_utf8(trimmed);
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

bool line_is_blank(const std::string& line) {
    for (char32_t cp : uni::decode_utf8(line, true))
        if (!uni::is_whitespace(cp)) return false;
    return true;
}

std::u32string trimmed_cps(const std::string& line) {
    std::u32string cps = uni::decode_utf8(line, true);
    std::size_t b = 0, e = cps.size();
    while (b < e && uni::is_whitespace(cps[b])) ++b;
    while (e > b && uni::is_whitespace(cps[e - 1])) --e;
    return cps.substr(b, e - b);
}

int64_t count_occurrences(std::string_view text, std::string_view needle) {
    int64_t n = 0;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++n;
        pos += needle.size(); // non-overlapping
    }
    return n;
}

} // namespace

FilterOutcome evaluate_quality_filters(const Document& doc, const StopwordSet& stopwords) {
    FilterOutcome o;
    o.doc_id = doc.doc_id;

    const std::vector<std::string> words = split_words(doc.text);
    const int64_t n_words = static_cast<int64_t>(words.size());

    std::unordered_set<std::string> unique(words.begin(), words.end());
    o.unique_tokens_lt_200 = static_cast<int64_t>(unique.size()) < 200;

    o.words_lt_50 = n_words < 50;
    o.words_gt_100000 = n_words > 100000;
    o.words_outside_50_100000 = o.words_lt_50 || o.words_gt_100000;

    int64_t alpha_words = 0;
    int64_t total_chars = 0;
    int64_t stopword_hits = 0;
    for (const std::string& w : words) {
        if (word_has_alpha(w)) ++alpha_words;
        total_chars += static_cast<int64_t>(uni::codepoint_count(w));
        if (stopword_hits < 2 && stopwords.count(stopword_key(w))) ++stopword_hits;
    }
    // Zero-word documents: ratio and mean are undefined; the word-count
    // filters already reject them, so these stay unflagged.
    o.alpha_word_ratio_lt_80 =
        n_words > 0 && static_cast<double>(alpha_words) / static_cast<double>(n_words) < 0.8;
    if (n_words > 0) {
        double mean_len = static_cast<double>(total_chars) / static_cast<double>(n_words);
        o.mean_word_len_outside_3_10 = mean_len < 3.0 || mean_len > 10.0;
    }
    o.stopwords_lt_2 = stopword_hits < 2;

    int64_t non_empty_lines = 0;
    int64_t ellipsis_lines = 0;
    int64_t bullet_lines = 0;
    for (const std::string& line : split_lines(doc.text)) {
        if (line_is_blank(line)) continue;
        ++non_empty_lines;
        std::u32string t = trimmed_cps(line);
        if (!t.empty() && (t.back() == U'…' ||
                           (t.size() >= 3 && t.compare(t.size() - 3, 3, U"...") == 0)))
            ++ellipsis_lines;
        if (!t.empty() && t.front() == U'*') ++bullet_lines;
    }
    if (non_empty_lines > 0) {
        o.ellipsis_lines_gt_30 =
            static_cast<double>(ellipsis_lines) / static_cast<double>(non_empty_lines) > 0.3;
        o.bullet_lines_gt_90 =
            static_cast<double>(bullet_lines) / static_cast<double>(non_empty_lines) > 0.9;
    }

    int64_t symbols = count_occurrences(doc.text, "#") + count_occurrences(doc.text, "...") +
                      count_occurrences(doc.text, "…");
    o.symbol_ratio_gt_0_1 =
        static_cast<double>(symbols) / static_cast<double>(std::max<int64_t>(n_words, 1)) > 0.1;

    o.keep = !o.any();
    return o;
}

// ---------------------------------------------------------------------------
// Shard pipeline
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> read_shard_lines(const std::string& path) {
    std::vector<std::string> lines;
    if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
        gzFile gz = gzopen(path.c_str(), "rb");
        if (!gz) throw DataError("cannot open shard: " + path);
        std::string buf;
        char chunk[1 << 16];
        int n;
        while ((n = gzread(gz, chunk, sizeof(chunk))) > 0) buf.append(chunk, static_cast<std::size_t>(n));
        bool failed = n < 0;
        gzclose(gz);
        if (failed) throw DataError("gzip read failed: " + path);
        std::istringstream is(buf);
        std::string line;
        while (std::getline(is, line)) lines.push_back(line);
    } else {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw DataError("cannot open shard: " + path);
        std::string line;
        while (std::getline(f, line)) lines.push_back(line);
        if (f.bad()) throw DataError("read failed: " + path);
    }
    return lines;
}

struct ProcessedDoc {
    bool keep = false;
    FilterOutcome outcome;
    std::string output_line; // re-serialized object with normalized text
    Document doc;
};

ProcessedDoc process_line(const std::string& line, int32_t shard_id, int64_t line_no,
                          const StopwordSet& stopwords) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        throw FormatError("shard " + std::to_string(shard_id) + " line " + std::to_string(line_no) +
                          ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string())
        throw FormatError("shard " + std::to_string(shard_id) + " line " + std::to_string(line_no) +
                          ": object with a \"text\" field required");

    ProcessedDoc p;
    p.doc.doc_id = obj.contains("id") && obj["id"].is_string()
                       ? obj["id"].get<std::string>()
                       : std::to_string(shard_id) + ":" + std::to_string(line_no);
    p.doc.shard_id = shard_id;
    p.doc.text = normalize(obj["text"].get<std::string>());
    p.outcome = evaluate_quality_filters(p.doc, stopwords);
    p.keep = p.outcome.keep;
    if (p.keep) {
        obj["text"] = p.doc.text;
        p.output_line = obj.dump();
    }
    return p;
}

std::string output_path_for(const std::string& shard_path, const std::string& output_dir) {
    fs::path p(shard_path);
    std::string name = p.filename().string();
    if (name.size() > 3 && name.compare(name.size() - 3, 3, ".gz") == 0)
        name.erase(name.size() - 3);
    if (name.size() > 6 && name.compare(name.size() - 6, 6, ".jsonl") == 0)
        name.erase(name.size() - 6);
    return (fs::path(output_dir) / (name + ".cleaned.jsonl")).string();
}

} // namespace

PipelineResult run_pipeline(const PipelineOptions& options, const StopwordSet& stopwords,
                            const std::function<void(const Document&)>& on_kept) {
    if (options.shard_paths.empty()) {
        PipelineResult empty;
        empty.report.shards_processed = 0;
        empty.report.total_shards = options.total_shards;
        return empty;
    }
    const int threads = std::max(1, options.threads);

    PipelineResult result;
    result.report.shards_processed = static_cast<int32_t>(options.shard_paths.size());
    result.report.total_shards = options.total_shards > 0
                                     ? options.total_shards
                                     : static_cast<int32_t>(options.shard_paths.size());

    if (!options.output_dir.empty()) fs::create_directories(options.output_dir);

    for (std::size_t si = 0; si < options.shard_paths.size(); ++si) {
        const std::string& path = options.shard_paths[si];
        const int32_t shard_id = static_cast<int32_t>(si);
        std::vector<std::string> lines = read_shard_lines(path);

        std::vector<ProcessedDoc> processed(lines.size());
        std::exception_ptr first_error;
        std::mutex error_mutex;
        if (threads == 1) {
            for (std::size_t i = 0; i < lines.size(); ++i)
                processed[i] =
                    process_line(lines[i], shard_id, static_cast<int64_t>(i) + 1, stopwords);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(threads));
            for (int t = 0; t < threads; ++t) {
                pool.emplace_back([&] {
                    while (true) {
                        std::size_t i = next.fetch_add(1);
                        if (i >= lines.size()) return;
                        try {
                            processed[i] = process_line(lines[i], shard_id,
                                                        static_cast<int64_t>(i) + 1, stopwords);
                        } catch (...) {
                            std::lock_guard<std::mutex> lock(error_mutex);
                            if (!first_error) first_error = std::current_exception();
                        }
                    }
                });
            }
            for (std::thread& th : pool) th.join();
            if (first_error) std::rethrow_exception(first_error);
        }

        std::ofstream out;
        if (!options.output_dir.empty()) {
            std::string out_path = output_path_for(path, options.output_dir);
            out.open(out_path, std::ios::binary);
            if (!out) throw DataError("cannot open for writing: " + out_path);
            result.output_files.push_back(out_path);
        }
        // Input order regardless of worker schedule.
        for (ProcessedDoc& p : processed) {
            result.report.add(p.outcome);
            if (!p.keep) continue;
            if (out.is_open()) out << p.output_line << '\n';
            if (on_kept) on_kept(p.doc);
        }
        if (out.is_open() && !out) throw DataError("write failed for shard output");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

namespace {

std::string with_thousands(int64_t v) {
    std::string raw = std::to_string(v);
    std::string out;
    int digits = 0;
    for (std::size_t i = raw.size(); i-- > 0;) {
        out.push_back(raw[i]);
        if (++digits % 3 == 0 && i > 0 && raw[i - 1] != '-') out.push_back(',');
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::string format_pct(double pct) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", pct);
    return buf;
}

struct ReportRow {
    std::string description;
    int64_t count;
};

std::vector<ReportRow> report_rows(const FilterReport& r) {
    return {
        {"Total examples", r.total_examples},
        {"At least one \"bad example filter\"", r.at_least_one},
        {"Less than 200 unique tokens", r.unique_tokens_lt_200},
        {"Number of words outside range of 50 to 100,000", r.words_outside_50_100000},
        {"Less than 50 words", r.words_lt_50},
        {"Less than 80% of words containing a alphabetic character", r.alpha_word_ratio_lt_80},
        {"More than 30% of lines ending with an ellipsis sign (\"...\")", r.ellipsis_lines_gt_30},
        {"Mean word length outside range of 3 to 10 characters", r.mean_word_len_outside_3_10},
        {"Less than 2 Portuguese stopwords", r.stopwords_lt_2},
        {"Symbol ratio (\"...\" or \"#\") greater than 0.1", r.symbol_ratio_gt_0_1},
        {"More than 90% of lines starting with a bullet sign (\"*\")", r.bullet_lines_gt_90},
        {"More than 100,000 words", r.words_gt_100000},
    };
}

} // namespace

std::string render_report_table(const FilterReport& r) {
    std::vector<ReportRow> rows = report_rows(r);
    std::string shard_hdr = "# (" + std::to_string(r.shards_processed) + " shards)";
    std::string est_hdr = "# (" + std::to_string(r.total_shards) + " shards estimate)";

    std::size_t desc_w = std::string("Description").size();
    for (const ReportRow& row : rows) desc_w = std::max(desc_w, row.description.size());

    std::ostringstream os;
    auto line = [&](const std::string& d, const std::string& c, const std::string& p,
                    const std::string& e) {
        os << d << std::string(desc_w - d.size() + 2, ' ');
        os << std::string(c.size() < 14 ? 14 - c.size() : 0, ' ') << c << "  ";
        os << std::string(p.size() < 7 ? 7 - p.size() : 0, ' ') << p << "  ";
        os << std::string(e.size() < 18 ? 18 - e.size() : 0, ' ') << e << "\n";
    };
    line("Description", shard_hdr, "%", est_hdr);
    for (const ReportRow& row : rows) {
        line(row.description, with_thousands(row.count),
             format_pct(report_percentage(row.count, r.total_examples)),
             with_thousands(extrapolate_count(row.count, r.shards_processed, r.total_shards)));
    }
    return os.str();
}

std::string render_report_json(const FilterReport& r) {
    auto entry = [&](int64_t count) {
        return json{{"count", count},
                    {"pct", report_percentage(count, r.total_examples)},
                    {"extrapolated", extrapolate_count(count, r.shards_processed, r.total_shards)}};
    };
    json doc = {{"total_examples", r.total_examples},
                {"kept", r.kept},
                {"shards_processed", r.shards_processed},
                {"total_shards", r.total_shards},
                {"at_least_one", entry(r.at_least_one)},
                {"filters",
                 {{"unique_tokens_lt_200", entry(r.unique_tokens_lt_200)},
                  {"words_outside_50_100000", entry(r.words_outside_50_100000)},
                  {"words_lt_50", entry(r.words_lt_50)},
                  {"words_gt_100000", entry(r.words_gt_100000)},
                  {"alpha_word_ratio_lt_80", entry(r.alpha_word_ratio_lt_80)},
                  {"ellipsis_lines_gt_30", entry(r.ellipsis_lines_gt_30)},
                  {"mean_word_len_outside_3_10", entry(r.mean_word_len_outside_3_10)},
                  {"stopwords_lt_2", entry(r.stopwords_lt_2)},
                  {"symbol_ratio_gt_0_1", entry(r.symbol_ratio_gt_0_1)},
                  {"bullet_lines_gt_90", entry(r.bullet_lines_gt_90)}}}};
    return doc.dump(2);
}

} // namespace cabrita
