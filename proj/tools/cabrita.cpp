// cabrita: command-line front end for the tokenizer-adaptation toolkit.
// Subcommands cover the full pipeline: corpus cleaning, tokenizer training
// and merging, sequence packing, embedding surgery, toy training, and
// tokenizer-efficiency benchmarking. Logging goes to stderr; data to files.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cabrita/bench.hpp"
#include "cabrita/checkpoint.hpp"
#include "cabrita/corpus.hpp"
#include "cabrita/error.hpp"
#include "cabrita/packing.hpp"
#include "cabrita/tokenizer.hpp"
#include "cabrita/tokenizer_merge.hpp"
#include "cabrita/transformer.hpp"

namespace fs = std::filesystem;
using cabrita::DataError;
using cabrita::FormatError;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    if (auto parent = fs::path(path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open file for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("failed writing file: " + path);
}

// Non-empty lines of a plain text file, one document per line.
std::vector<std::string> read_document_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

// NDJSON documents: one JSON object per line with a string "text" field.
void append_ndjson_texts(const std::string& path, std::vector<std::string>& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string()) {
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": expected an object with a string \"text\" field");
        }
        out.push_back(obj["text"].get<std::string>());
    }
}

bool wildcard_match(std::string_view pattern, std::string_view name) {
    std::size_t p = 0, n = 0, star = std::string_view::npos, mark = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = n;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            n = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

// Expands a trailing-component glob ("dir/*.jsonl"); sorted for stable order.
std::vector<std::string> expand_glob(const std::string& pattern) {
    fs::path pat(pattern);
    std::string leaf = pat.filename().string();
    if (leaf.find('*') == std::string::npos && leaf.find('?') == std::string::npos) {
        return {pattern};
    }
    fs::path dir = pat.parent_path();
    if (dir.empty()) dir = ".";
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::vector<std::string> matches;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        if (wildcard_match(leaf, name)) matches.push_back(entry.path().string());
    }
    std::sort(matches.begin(), matches.end());
    if (matches.empty()) throw DataError("no files match pattern: " + pattern);
    return matches;
}

// ---------------------------------------------------------------- subcommands

struct TrainTokenizerArgs {
    std::vector<std::string> text_inputs;
    std::vector<std::string> jsonl_inputs;
    std::string output;
    int32_t vocab_size = 0;
    int max_piece_chars = 16;
    double coverage = 1.0;
};

cabrita::TokenizerModel train_tokenizer_from_corpus(const std::vector<std::string>& corpus,
                                                    int32_t vocab_size, int max_piece_chars,
                                                    double coverage) {
    cabrita::TrainerConfig config;
    config.target_vocab_size = vocab_size;
    config.max_piece_chars = max_piece_chars;
    config.character_coverage = coverage;
    return cabrita::train_bpe(corpus, config);
}

void run_train_tokenizer(const TrainTokenizerArgs& a) {
    std::vector<std::string> corpus;
    for (const auto& path : a.text_inputs) {
        auto lines = read_document_lines(path);
        corpus.insert(corpus.end(), lines.begin(), lines.end());
    }
    for (const auto& path : a.jsonl_inputs) append_ndjson_texts(path, corpus);
    if (corpus.empty()) throw DataError("no input documents");
    std::cerr << "[train-tokenizer] documents=" << corpus.size()
              << " target_vocab=" << a.vocab_size << "\n";
    cabrita::TokenizerModel model =
        train_tokenizer_from_corpus(corpus, a.vocab_size, a.max_piece_chars, a.coverage);
    model.save(a.output);
    std::cerr << "[train-tokenizer] vocab=" << model.vocab_size() << " -> " << a.output << "\n";
}

struct MergeTokenizerArgs {
    std::string base;
    std::string addon;
    std::string output;
    int32_t target_vocab_size = 0; // 0: append every novel addon piece
};

void run_merge_tokenizer(const MergeTokenizerArgs& a) {
    cabrita::TokenizerModel base = cabrita::TokenizerModel::load(a.base);
    cabrita::TokenizerModel addon = cabrita::TokenizerModel::load(a.addon);
    cabrita::MergeSpec spec;
    spec.target_vocab_size =
        a.target_vocab_size > 0 ? a.target_vocab_size : base.vocab_size() + addon.vocab_size();
    cabrita::TokenizerModel merged = cabrita::merge_tokenizers(base, addon, spec);
    merged.save(a.output);
    std::cerr << cabrita::render_merge_summary(cabrita::merge_diff(base, merged));
    std::cerr << "[merge-tokenizer] vocab=" << merged.vocab_size() << " -> " << a.output << "\n";
}

struct CleanCorpusArgs {
    std::vector<std::string> inputs;
    std::string input_glob;
    std::string output_dir;
    std::string stopwords;
    std::string report_json;
    std::string report_table;
    int32_t total_shards = 0;
    int threads = 1;
};

void run_clean_corpus(const CleanCorpusArgs& a) {
    cabrita::PipelineOptions options;
    options.shard_paths = a.inputs;
    if (!a.input_glob.empty()) {
        auto expanded = expand_glob(a.input_glob);
        options.shard_paths.insert(options.shard_paths.end(), expanded.begin(), expanded.end());
    }
    if (options.shard_paths.empty()) throw DataError("no input shards");
    options.output_dir = a.output_dir;
    options.total_shards = a.total_shards;
    options.threads = a.threads;
    cabrita::StopwordSet stopwords = cabrita::load_stopwords(a.stopwords);
    std::cerr << "[clean-corpus] shards=" << options.shard_paths.size()
              << " threads=" << options.threads << "\n";
    cabrita::PipelineResult result = cabrita::run_pipeline(options, stopwords);
    std::cerr << cabrita::render_report_table(result.report);
    if (!a.report_json.empty())
        write_file(a.report_json, cabrita::render_report_json(result.report));
    if (!a.report_table.empty())
        write_file(a.report_table, cabrita::render_report_table(result.report));
    for (const auto& f : result.output_files) std::cerr << "[clean-corpus] wrote " << f << "\n";
}

struct PackArgs {
    std::vector<std::string> inputs; // cleaned NDJSON shards
    std::string tokenizer;
    std::string output;
    int32_t seq_len = 128;
    bool pad_final = false;
    uint32_t pad_id = 0;
};

cabrita::PackedSequences pack_texts(const cabrita::TokenizerModel& model,
                                    const std::vector<std::string>& texts, int32_t seq_len,
                                    bool pad_final, uint32_t pad_id) {
    std::vector<std::vector<uint32_t>> docs;
    docs.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<int32_t> ids = cabrita::encode(model, text);
        docs.emplace_back(ids.begin(), ids.end());
    }
    return cabrita::pack(docs, seq_len, static_cast<uint32_t>(model.bos_id()),
                         static_cast<uint32_t>(model.eos_id()), pad_final, pad_id);
}

void run_pack(const PackArgs& a) {
    cabrita::TokenizerModel model = cabrita::TokenizerModel::load(a.tokenizer);
    std::vector<std::string> texts;
    for (const auto& path : a.inputs) append_ndjson_texts(path, texts);
    if (texts.empty()) throw DataError("no input documents");
    cabrita::PackedSequences packed = pack_texts(model, texts, a.seq_len, a.pad_final, a.pad_id);
    cabrita::save_packed(packed, a.output);
    cabrita::PackStats stats = cabrita::unpack_check(packed, static_cast<uint32_t>(model.bos_id()),
                                                     static_cast<uint32_t>(model.eos_id()));
    std::cerr << "[pack] docs=" << packed.doc_count << " sequences=" << packed.sequences.size()
              << " seq_len=" << packed.seq_len << " dropped_tail=" << packed.dropped_tail
              << " bos=" << stats.bos_count << " eos=" << stats.eos_count << " -> " << a.output
              << "\n";
}

struct SurgeryArgs {
    std::string checkpoint_in;
    std::string checkpoint_out;
    std::string tokenizer_old;    // optional: must match the checkpoint's vocabulary
    std::string tokenizer_merged; // its size is the new vocabulary
    int32_t new_vocab = 0;        // alternative to --tokenizer-merged
    std::string init = "mean";
    double sigma = 0.02;
    uint64_t seed = 0;
};

cabrita::SurgeryReport resize_and_verify(const cabrita::Checkpoint& before, int32_t new_vocab,
                                         const cabrita::InitStrategy& init,
                                         cabrita::Checkpoint& after) {
    after = cabrita::resize_embeddings(before, new_vocab, init);
    std::vector<uint32_t> probe;
    int32_t probe_len = std::min({before.config.vocab_size, before.config.max_seq_len, 16});
    for (int32_t i = 0; i < probe_len; ++i) probe.push_back(static_cast<uint32_t>(i));
    return cabrita::verify_surgery(before, after, probe);
}

void run_surgery(const SurgeryArgs& a) {
    cabrita::Checkpoint before = cabrita::load_checkpoint(a.checkpoint_in);
    if (!a.tokenizer_old.empty()) {
        int32_t old_vocab = cabrita::TokenizerModel::load(a.tokenizer_old).vocab_size();
        if (old_vocab != before.config.vocab_size)
            throw DataError("old tokenizer size " + std::to_string(old_vocab) +
                            " does not match checkpoint vocabulary " +
                            std::to_string(before.config.vocab_size));
    }
    int32_t new_vocab = a.new_vocab;
    if (!a.tokenizer_merged.empty())
        new_vocab = cabrita::TokenizerModel::load(a.tokenizer_merged).vocab_size();
    if (new_vocab <= 0)
        throw DataError("new vocabulary size must come from --tokenizer-merged or --new-vocab");
    cabrita::InitStrategy init = a.init == "gaussian"
                                     ? cabrita::InitStrategy::gaussian(a.sigma, a.seed)
                                     : cabrita::InitStrategy::mean();
    cabrita::Checkpoint after;
    cabrita::SurgeryReport report = resize_and_verify(before, new_vocab, init, after);
    cabrita::save_checkpoint(after, a.checkpoint_out);
    std::cerr << "[surgery] vocab " << before.config.vocab_size << " -> " << new_vocab
              << " init=" << a.init << "\n";
    std::cerr << "[surgery] old-region logits: max_abs_dev=" << report.max_abs_deviation
              << " max_rel_dev=" << report.max_rel_deviation
              << " compared=" << report.compared_logits << (report.ok ? " ok" : " MISMATCH")
              << "\n";
    if (!report.ok) throw DataError("surgery verification failed: old-region logits deviate");
    std::cerr << "[surgery] wrote " << a.checkpoint_out << "\n";
}

struct ToyTrainArgs {
    std::string data;
    std::string checkpoint_in;
    std::string checkpoint_out;
    std::string trace;
    int32_t init_vocab = 0;
    int64_t steps = 20;
    int64_t micro_batch = 4;
    int64_t accumulation = 1;
    uint64_t seed = 42;
    std::string precision = "f32";
    // model shape for fresh initialization
    int32_t d_model = 64;
    int32_t n_layers = 2;
    int32_t n_heads = 4;
    int32_t d_ff = 256;
    int32_t seq_len = 128;
    double rope_base = 10000.0;
    double rmsnorm_eps = 1e-6;
    cabrita::TrainingSchedule schedule;
    cabrita::AdamwHyper hyper;
};

void run_toy_train(const ToyTrainArgs& a) {
    cabrita::PackedSequences data = cabrita::load_packed(a.data);
    cabrita::Checkpoint start;
    if (!a.checkpoint_in.empty()) {
        start = cabrita::load_checkpoint(a.checkpoint_in);
    } else {
        if (a.init_vocab <= 0)
            throw DataError("either --checkpoint-in or --init-vocab is required");
        cabrita::ModelConfig config;
        config.vocab_size = a.init_vocab;
        config.d_model = a.d_model;
        config.n_layers = a.n_layers;
        config.n_heads = a.n_heads;
        config.d_ff = a.d_ff;
        config.max_seq_len = a.seq_len;
        config.rope_base = a.rope_base;
        config.rmsnorm_eps = a.rmsnorm_eps;
        start = cabrita::random_checkpoint(config, a.seed);
    }
    cabrita::Precision precision =
        a.precision == "f64" ? cabrita::Precision::f64 : cabrita::Precision::f32;
    std::cerr << "[toy-train] sequences=" << data.sequences.size() << " steps=" << a.steps
              << " micro_batch=" << a.micro_batch << " accumulation=" << a.accumulation << "\n";
    cabrita::TrainResult result = cabrita::train(start, data, a.schedule, a.hyper, a.micro_batch,
                                                 a.accumulation, a.steps, precision);
    if (!a.checkpoint_out.empty()) cabrita::save_checkpoint(result.checkpoint, a.checkpoint_out);
    if (!a.trace.empty()) write_file(a.trace, cabrita::trace_to_csv(result.trace));
    if (!result.trace.empty()) {
        std::cerr << "[toy-train] first_loss=" << result.trace.front().loss
                  << " last_loss=" << result.trace.back().loss << "\n";
    }
    if (!a.checkpoint_out.empty()) std::cerr << "[toy-train] wrote " << a.checkpoint_out << "\n";
}

struct BenchArgs {
    std::vector<std::string> tokenizers; // name=path
    std::string text_a;
    std::string text_b;
    std::string out_markdown;
    std::string out_csv;
    std::string base_name;
    std::string adapted_name;
};

void run_bench(const BenchArgs& a) {
    std::vector<std::pair<std::string, cabrita::TokenizerModel>> loaded;
    for (const auto& spec : a.tokenizers) {
        std::string name, path;
        if (auto eq = spec.find('='); eq != std::string::npos) {
            name = spec.substr(0, eq);
            path = spec.substr(eq + 1);
        } else {
            path = spec;
            name = fs::path(spec).stem().string();
        }
        if (name.empty() || path.empty())
            throw DataError("bad --tokenizer value (want name=path): " + spec);
        loaded.emplace_back(name, cabrita::TokenizerModel::load(path));
    }
    std::vector<std::pair<std::string, const cabrita::TokenizerModel*>> refs;
    refs.reserve(loaded.size());
    for (const auto& [name, model] : loaded) refs.emplace_back(name, &model);

    std::string text_a = read_file(a.text_a);
    std::string text_b = read_file(a.text_b);
    cabrita::BenchResult result = cabrita::run_bench(refs, text_a, text_b);

    std::string markdown = cabrita::emit_table_markdown(result);
    if (!a.out_markdown.empty()) {
        write_file(a.out_markdown, markdown);
        std::cerr << "[bench] wrote " << a.out_markdown << "\n";
    } else {
        std::cout << markdown;
    }
    if (!a.out_csv.empty()) {
        write_file(a.out_csv, cabrita::emit_table_csv(result));
        std::cerr << "[bench] wrote " << a.out_csv << "\n";
    }
    if (!a.base_name.empty() && !a.adapted_name.empty()) {
        cabrita::ReductionReport red =
            cabrita::reduction_report(result, a.base_name, a.adapted_name);
        std::cerr << "[bench] token reduction " << red.base_name << " -> " << red.adapted_name
                  << ": text A " << red.reduction_a_pct << "%, text B " << red.reduction_b_pct
                  << "%\n";
    }
}

struct EndToEndArgs {
    std::string data_dir = "data";
    std::string out_dir;
    uint64_t seed = 42;
    int threads = 1;
    int64_t steps = 20;
};

// Full pipeline on the bundled sample corpus: clean -> train both tokenizers
// -> merge -> pack -> checkpoint surgery -> short training run -> benchmark.
// Deterministic in the seed: artifacts are byte-identical across runs.
void run_end_to_end(const EndToEndArgs& a) {
    const fs::path data_dir(a.data_dir);
    const fs::path out_dir(a.out_dir);
    fs::create_directories(out_dir);

    // 1. Clean the bundled sample shard; collect kept documents.
    cabrita::StopwordSet stopwords =
        cabrita::load_stopwords((data_dir / "stopwords_pt.txt").string());
    cabrita::PipelineOptions pipeline_options;
    pipeline_options.shard_paths = {(data_dir / "sample_shard_000.jsonl").string()};
    pipeline_options.output_dir = (out_dir / "clean").string();
    pipeline_options.threads = a.threads;
    std::vector<std::string> kept_texts;
    cabrita::PipelineResult pipeline_result = cabrita::run_pipeline(
        pipeline_options, stopwords,
        [&](const cabrita::Document& doc) { kept_texts.push_back(doc.text); });
    std::cerr << cabrita::render_report_table(pipeline_result.report);
    write_file((out_dir / "filter_report.txt").string(),
               cabrita::render_report_table(pipeline_result.report));
    write_file((out_dir / "filter_report.json").string(),
               cabrita::render_report_json(pipeline_result.report));
    if (kept_texts.empty()) throw DataError("cleaning kept no documents");
    std::cerr << "[end-to-end] kept_docs=" << kept_texts.size() << "\n";

    // 2. Base tokenizer on the English sample, addon on the cleaned
    //    Portuguese documents, then merge (base preserved, addon appended).
    std::vector<std::string> english_corpus =
        read_document_lines((data_dir / "sample_legal_en.txt").string());
    cabrita::TokenizerModel base = train_tokenizer_from_corpus(english_corpus, 8000, 16, 1.0);
    base.save((out_dir / "tokenizer_base.json").string());
    std::cerr << "[end-to-end] base tokenizer vocab=" << base.vocab_size() << "\n";

    cabrita::TokenizerModel addon = train_tokenizer_from_corpus(kept_texts, 6000, 16, 1.0);
    addon.save((out_dir / "tokenizer_addon.json").string());
    std::cerr << "[end-to-end] addon tokenizer vocab=" << addon.vocab_size() << "\n";

    cabrita::MergeSpec merge_spec;
    merge_spec.target_vocab_size = base.vocab_size() + 4000;
    cabrita::TokenizerModel merged = cabrita::merge_tokenizers(base, addon, merge_spec);
    merged.save((out_dir / "tokenizer_merged.json").string());
    std::cerr << cabrita::render_merge_summary(cabrita::merge_diff(base, merged));

    // 3. Pack the cleaned documents with the merged tokenizer.
    cabrita::PackedSequences packed = pack_texts(merged, kept_texts, 128, false, 0);
    cabrita::save_packed(packed, (out_dir / "packed.bin").string());
    std::cerr << "[end-to-end] sequences=" << packed.sequences.size()
              << " dropped_tail=" << packed.dropped_tail << "\n";

    // 4. Checkpoint sized for the base vocabulary, grown to the merged one.
    cabrita::ModelConfig config;
    config.vocab_size = base.vocab_size();
    cabrita::Checkpoint before = cabrita::random_checkpoint(config, a.seed);
    cabrita::save_checkpoint(before, (out_dir / "checkpoint_base.cbrt").string());
    cabrita::Checkpoint after;
    cabrita::SurgeryReport surgery =
        resize_and_verify(before, merged.vocab_size(), cabrita::InitStrategy::mean(), after);
    cabrita::save_checkpoint(after, (out_dir / "checkpoint_resized.cbrt").string());
    std::cerr << "[end-to-end] surgery max_abs_dev=" << surgery.max_abs_deviation
              << (surgery.ok ? " ok" : " MISMATCH") << "\n";
    if (!surgery.ok) throw DataError("surgery verification failed");

    // 5. Short training run on the packed sample; short warmup so the toy
    //    run sees a non-trivial learning rate.
    cabrita::TrainingSchedule schedule;
    schedule.warmup_steps = std::max<int64_t>(1, a.steps / 4);
    schedule.peak_lr = 1e-3;
    schedule.final_lr = 1e-4;
    schedule.decay_steps = std::max<int64_t>(1, a.steps);
    cabrita::AdamwHyper hyper;
    cabrita::TrainResult trained =
        cabrita::train(after, packed, schedule, hyper, 4, 1, a.steps, cabrita::Precision::f32);
    cabrita::save_checkpoint(trained.checkpoint, (out_dir / "checkpoint_trained.cbrt").string());
    write_file((out_dir / "loss_trace.csv").string(), cabrita::trace_to_csv(trained.trace));
    if (!trained.trace.empty()) {
        std::cerr << "[end-to-end] first_loss=" << trained.trace.front().loss
                  << " last_loss=" << trained.trace.back().loss << "\n";
    }

    // 6. Benchmark base vs merged on the parallel sample texts.
    std::string text_pt = read_file((data_dir / "sample_legal_pt.txt").string());
    std::string text_en = read_file((data_dir / "sample_legal_en.txt").string());
    cabrita::BenchResult bench = cabrita::run_bench(
        {{"base", &base}, {"merged", &merged}}, text_pt, text_en);
    write_file((out_dir / "bench_report.md").string(), cabrita::emit_table_markdown(bench));
    write_file((out_dir / "bench_report.csv").string(), cabrita::emit_table_csv(bench));
    cabrita::ReductionReport reduction = cabrita::reduction_report(bench, "base", "merged");
    std::cerr << "[end-to-end] token reduction base -> merged: Portuguese "
              << reduction.reduction_a_pct << "%, English " << reduction.reduction_b_pct << "%\n";
    std::cerr << "[end-to-end] artifacts in " << out_dir.string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"corpus cleaning, tokenizer adaptation, and toy LM training"};
    app.set_config("--config", "", "Read options from a TOML config file");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    TrainTokenizerArgs train_args;
    auto* train_cmd = app.add_subcommand("train-tokenizer", "Train a BPE tokenizer");
    train_cmd->add_option("--input", train_args.text_inputs,
                          "Plain text input, one document per line (repeatable)");
    train_cmd->add_option("--input-jsonl", train_args.jsonl_inputs,
                          "NDJSON input with a text field per line (repeatable)");
    train_cmd->add_option("--output", train_args.output, "Tokenizer JSON output path")->required();
    train_cmd->add_option("--vocab-size", train_args.vocab_size, "Target vocabulary size")
        ->required()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--max-piece-chars", train_args.max_piece_chars,
                          "Maximum piece length in codepoints");
    train_cmd->add_option("--coverage", train_args.coverage,
                          "Character coverage in (0,1]; rare characters fall to unknown");
    train_cmd->callback([&] { run_train_tokenizer(train_args); });

    MergeTokenizerArgs merge_args;
    auto* merge_cmd =
        app.add_subcommand("merge-tokenizer", "Append novel addon pieces to a base tokenizer");
    merge_cmd->add_option("--base", merge_args.base, "Base tokenizer JSON")->required();
    merge_cmd->add_option("--addon", merge_args.addon, "Addon tokenizer JSON")->required();
    merge_cmd->add_option("--output", merge_args.output, "Merged tokenizer output path")
        ->required();
    merge_cmd->add_option("--target-vocab-size", merge_args.target_vocab_size,
                          "Stop appending at this size (0: append all novel pieces)");
    merge_cmd->callback([&] { run_merge_tokenizer(merge_args); });

    CleanCorpusArgs clean_args;
    auto* clean_cmd =
        app.add_subcommand("clean-corpus", "Run quality filters over NDJSON shards");
    clean_cmd->add_option("--input", clean_args.inputs, "Shard path (.jsonl or .jsonl.gz)");
    clean_cmd->add_option("--input-glob", clean_args.input_glob,
                          "Glob for shard files, e.g. data/shard_*.jsonl");
    clean_cmd->add_option("--output-dir", clean_args.output_dir,
                          "Directory for cleaned shards (omit to only report)");
    clean_cmd->add_option("--stopwords", clean_args.stopwords, "Stopword list, one per line")
        ->required();
    clean_cmd->add_option("--report-json", clean_args.report_json, "Write the report as JSON");
    clean_cmd->add_option("--report-table", clean_args.report_table,
                          "Write the report as an aligned text table");
    clean_cmd->add_option("--total-shards", clean_args.total_shards,
                          "Full corpus shard count for extrapolation (0: processed count)");
    clean_cmd->add_option("--threads", clean_args.threads, "Worker thread cap")
        ->check(CLI::PositiveNumber);
    clean_cmd->callback([&] { run_clean_corpus(clean_args); });

    PackArgs pack_args;
    auto* pack_cmd =
        app.add_subcommand("pack", "Tokenize documents and pack fixed-length sequences");
    pack_cmd->add_option("--input", pack_args.inputs, "Cleaned NDJSON shard (repeatable)")
        ->required();
    pack_cmd->add_option("--tokenizer", pack_args.tokenizer, "Tokenizer JSON")->required();
    pack_cmd->add_option("--output", pack_args.output, "Packed binary output path")->required();
    pack_cmd->add_option("--seq-len", pack_args.seq_len, "Sequence length");
    pack_cmd->add_flag("--pad-final", pack_args.pad_final,
                       "Pad the final partial block instead of dropping it");
    pack_cmd->add_option("--pad-id", pack_args.pad_id, "Pad token id used with --pad-final");
    pack_cmd->callback([&] { run_pack(pack_args); });

    SurgeryArgs surgery_args;
    auto* surgery_cmd = app.add_subcommand(
        "surgery", "Grow checkpoint embedding and head rows to a new vocabulary");
    surgery_cmd->add_option("--checkpoint", surgery_args.checkpoint_in, "Input checkpoint")
        ->required();
    surgery_cmd->add_option("--output", surgery_args.checkpoint_out, "Output checkpoint")
        ->required();
    surgery_cmd->add_option("--tokenizer-old", surgery_args.tokenizer_old,
                            "Original tokenizer; validated against the checkpoint vocabulary");
    surgery_cmd->add_option("--tokenizer-merged", surgery_args.tokenizer_merged,
                            "Merged tokenizer; its size is the new vocabulary");
    surgery_cmd->add_option("--new-vocab", surgery_args.new_vocab,
                            "New vocabulary size (alternative to --tokenizer-merged)");
    surgery_cmd->add_option("--init", surgery_args.init, "Row init: mean or gaussian")
        ->check(CLI::IsMember({"mean", "gaussian"}));
    surgery_cmd->add_option("--sigma", surgery_args.sigma, "Gaussian sigma for --init gaussian");
    surgery_cmd->add_option("--seed", surgery_args.seed, "Gaussian seed for --init gaussian");
    surgery_cmd->callback([&] { run_surgery(surgery_args); });

    ToyTrainArgs toy_args;
    auto* toy_cmd = app.add_subcommand("toy-train", "Train the toy LM on packed sequences");
    toy_cmd->add_option("--data", toy_args.data, "Packed sequence file")->required();
    toy_cmd->add_option("--checkpoint-in", toy_args.checkpoint_in, "Starting checkpoint");
    toy_cmd->add_option("--checkpoint-out", toy_args.checkpoint_out, "Trained checkpoint path");
    toy_cmd->add_option("--trace", toy_args.trace, "Loss trace CSV path");
    toy_cmd->add_option("--init-vocab", toy_args.init_vocab,
                        "Vocabulary size for a fresh random checkpoint (no --checkpoint-in)");
    toy_cmd->add_option("--steps", toy_args.steps, "Optimizer steps")->check(CLI::PositiveNumber);
    toy_cmd->add_option("--micro-batch", toy_args.micro_batch, "Sequences per micro-batch")
        ->check(CLI::PositiveNumber);
    toy_cmd->add_option("--accum", toy_args.accumulation, "Micro-batches per optimizer step")
        ->check(CLI::PositiveNumber);
    toy_cmd->add_option("--seed", toy_args.seed, "Seed for fresh initialization");
    toy_cmd->add_option("--precision", toy_args.precision, "Training arithmetic: f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));
    toy_cmd->add_option("--d-model", toy_args.d_model, "Model width for fresh initialization");
    toy_cmd->add_option("--n-layers", toy_args.n_layers, "Layers for fresh initialization");
    toy_cmd->add_option("--n-heads", toy_args.n_heads, "Heads for fresh initialization");
    toy_cmd->add_option("--d-ff", toy_args.d_ff, "Feed-forward width for fresh initialization");
    toy_cmd->add_option("--seq-len", toy_args.seq_len, "Maximum sequence length");
    toy_cmd->add_option("--rope-base", toy_args.rope_base, "Rotary position base");
    toy_cmd->add_option("--rmsnorm-eps", toy_args.rmsnorm_eps, "RMS norm epsilon");
    toy_cmd->add_option("--warmup", toy_args.schedule.warmup_steps, "Warmup steps");
    toy_cmd->add_option("--peak-lr", toy_args.schedule.peak_lr, "Peak learning rate");
    toy_cmd->add_option("--final-lr", toy_args.schedule.final_lr, "Final learning rate");
    toy_cmd->add_option("--decay-steps", toy_args.schedule.decay_steps, "Cosine decay steps");
    toy_cmd->add_option("--beta1", toy_args.hyper.beta1, "Adam beta1");
    toy_cmd->add_option("--beta2", toy_args.hyper.beta2, "Adam beta2");
    toy_cmd->add_option("--weight-decay", toy_args.hyper.weight_decay, "Decoupled weight decay");
    toy_cmd->add_option("--clip-norm", toy_args.hyper.clip_norm, "Global gradient norm clip");
    toy_cmd->add_option("--epsilon", toy_args.hyper.epsilon, "Adam epsilon");
    toy_cmd->callback([&] { run_toy_train(toy_args); });

    BenchArgs bench_args;
    auto* bench_cmd =
        app.add_subcommand("bench", "Compare tokenizer efficiency on two parallel texts");
    bench_cmd->add_option("--tokenizer", bench_args.tokenizers,
                          "Tokenizer as name=path (repeatable)")
        ->required();
    bench_cmd->add_option("--text-a", bench_args.text_a, "Text A (e.g. Portuguese sample)")
        ->required();
    bench_cmd->add_option("--text-b", bench_args.text_b, "Text B (e.g. English sample)")
        ->required();
    bench_cmd->add_option("--out", bench_args.out_markdown,
                          "Markdown table output path (default: stdout)");
    bench_cmd->add_option("--csv", bench_args.out_csv, "CSV table output path");
    bench_cmd->add_option("--base", bench_args.base_name, "Base entry for the reduction summary");
    bench_cmd->add_option("--adapted", bench_args.adapted_name,
                          "Adapted entry for the reduction summary");
    bench_cmd->callback([&] { run_bench(bench_args); });

    EndToEndArgs e2e_args;
    auto* e2e_cmd =
        app.add_subcommand("end-to-end", "Run the whole pipeline on the bundled sample corpus");
    e2e_cmd->add_option("--data-dir", e2e_args.data_dir, "Directory with the bundled samples");
    e2e_cmd->add_option("--out-dir", e2e_args.out_dir, "Artifact output directory")->required();
    e2e_cmd->add_option("--seed", e2e_args.seed, "Seed for checkpoint initialization");
    e2e_cmd->add_option("--threads", e2e_args.threads, "Worker thread cap")
        ->check(CLI::PositiveNumber);
    e2e_cmd->add_option("--steps", e2e_args.steps, "Training steps")->check(CLI::PositiveNumber);
    e2e_cmd->callback([&] { run_end_to_end(e2e_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
