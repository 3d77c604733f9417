#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "cabrita/checkpoint.hpp"
#include "cabrita/packing.hpp"
#include "cabrita/tokenizer.hpp"
#include "support/test_util.hpp"

namespace ct = cabrita::testing;
namespace fs = std::filesystem;

namespace {

ct::CommandResult cli(const std::string& args, const ct::TempDir& dir) {
    return ct::run_command("'" + ct::cli_binary() + "' " + args, dir);
}

std::string q(const std::string& path) { return "'" + path + "'"; }

// Writes a tokenizer trained on the given lines and returns its path.
std::string make_tokenizer(const ct::TempDir& dir, const std::string& name,
                           const std::vector<std::string>& corpus, int32_t target) {
    cabrita::TrainerConfig config;
    config.target_vocab_size = target;
    cabrita::TokenizerModel model = cabrita::train_bpe(corpus, config);
    std::string path = dir.file(name);
    model.save(path);
    return path;
}

} // namespace

TEST_CASE("help exits zero everywhere") {
    ct::TempDir dir("cli_help");
    CHECK(cli("--help", dir).exit_code == 0);
    for (const char* sub : {"train-tokenizer", "merge-tokenizer", "clean-corpus", "pack",
                            "surgery", "toy-train", "bench", "end-to-end"}) {
        ct::CommandResult r = cli(std::string(sub) + " --help", dir);
        CHECK(r.exit_code == 0);
        CHECK(r.out.find("Usage") != std::string::npos);
    }
}

TEST_CASE("usage errors exit 2") {
    ct::TempDir dir("cli_usage");

    ct::CommandResult none = cli("", dir);
    CHECK(none.exit_code == 2);

    ct::CommandResult unknown = cli("frobnicate", dir);
    CHECK(unknown.exit_code == 2);

    // Required flags missing.
    ct::CommandResult missing = cli("train-tokenizer --input x.txt", dir);
    CHECK(missing.exit_code == 2);
    CHECK(missing.err.find("--output") != std::string::npos);

    ct::CommandResult bad_value =
        cli("surgery --checkpoint a --output b --init sideways", dir);
    CHECK(bad_value.exit_code == 2);
}

TEST_CASE("train-tokenizer writes a loadable model") {
    ct::TempDir dir("cli_train");
    ct::write_text_file(dir.file("corpus.txt"), "ab ab ab\n");
    std::string out = dir.file("tok.json");

    ct::CommandResult r = cli("train-tokenizer --input " + q(dir.file("corpus.txt")) +
                                  " --output " + q(out) + " --vocab-size 8",
                              dir);
    CHECK(r.exit_code == 0);
    CHECK(r.err.find("vocab=8") != std::string::npos);
    cabrita::TokenizerModel model = cabrita::TokenizerModel::load(out);
    CHECK(model.vocab_size() == 8);
    CHECK(cabrita::encode(model, "ab ab").size() == 2);

    // Data errors (impossible target) exit 3 with a single-line message.
    ct::CommandResult bad = cli("train-tokenizer --input " + q(dir.file("corpus.txt")) +
                                    " --output " + q(out) + " --vocab-size 4",
                                dir);
    CHECK(bad.exit_code == 3);
    CHECK(bad.err.find("error: ") != std::string::npos);

    // Missing input file.
    ct::CommandResult gone = cli("train-tokenizer --input " + q(dir.file("nope.txt")) +
                                     " --output " + q(out) + " --vocab-size 8",
                                 dir);
    CHECK(gone.exit_code == 3);
}

TEST_CASE("merge-tokenizer appends addon pieces") {
    ct::TempDir dir("cli_merge");
    std::string base = make_tokenizer(dir, "base.json", {"ab ab ab"}, 8);
    std::string addon = make_tokenizer(dir, "addon.json", {"cd cd cd"}, 8);
    std::string out = dir.file("merged.json");

    ct::CommandResult r = cli("merge-tokenizer --base " + q(base) + " --addon " + q(addon) +
                                  " --output " + q(out),
                              dir);
    CHECK(r.exit_code == 0);
    cabrita::TokenizerModel merged = cabrita::TokenizerModel::load(out);
    cabrita::TokenizerModel base_model = cabrita::TokenizerModel::load(base);
    CHECK(merged.vocab_size() > base_model.vocab_size());
    for (int32_t id = 0; id < base_model.vocab_size(); ++id)
        CHECK(merged.piece(id) == base_model.piece(id));
}

TEST_CASE("clean-corpus reports and malformed shards exit 4") {
    ct::TempDir dir("cli_clean");
    std::string stopwords = ct::data_path("stopwords_pt.txt");

    // A well-formed shard with one obviously short document.
    ct::write_text_file(dir.file("shard.jsonl"),
                        "{\"id\": \"d0\", \"text\": \"pequeno demais\"}\n");
    ct::CommandResult r = cli("clean-corpus --input " + q(dir.file("shard.jsonl")) +
                                  " --stopwords " + q(stopwords) + " --report-json " +
                                  q(dir.file("report.json")),
                              dir);
    CHECK(r.exit_code == 0);
    CHECK(r.err.find("Total examples") != std::string::npos);
    CHECK(ct::read_text_file(dir.file("report.json")).find("\"total_examples\"") !=
          std::string::npos);

    // Malformed JSON is a format error.
    ct::write_text_file(dir.file("bad.jsonl"), "this is not json\n");
    ct::CommandResult bad = cli("clean-corpus --input " + q(dir.file("bad.jsonl")) +
                                    " --stopwords " + q(stopwords),
                                dir);
    CHECK(bad.exit_code == 4);
    CHECK(bad.err.find("error: ") != std::string::npos);

    // Glob with no matches is a data error.
    ct::CommandResult empty = cli("clean-corpus --input-glob " + q(dir.file("none_*.jsonl")) +
                                      " --stopwords " + q(stopwords),
                                  dir);
    CHECK(empty.exit_code == 3);
}

TEST_CASE("pack emits the binary plus sidecar") {
    ct::TempDir dir("cli_pack");
    std::string tok = make_tokenizer(dir, "tok.json", {"ab ab ab"}, 8);
    ct::write_text_file(dir.file("docs.jsonl"),
                        "{\"text\": \"ab ab ab\"}\n{\"text\": \"ab ab\"}\n");
    std::string out = dir.file("packed.bin");

    ct::CommandResult r = cli("pack --input " + q(dir.file("docs.jsonl")) + " --tokenizer " +
                                  q(tok) + " --output " + q(out) + " --seq-len 4",
                              dir);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(out));
    CHECK(fs::exists(out + ".json"));
    cabrita::PackedSequences packed = cabrita::load_packed(out);
    CHECK(packed.seq_len == 4);
    CHECK(packed.doc_count == 2);

    // Malformed NDJSON exits 4.
    ct::write_text_file(dir.file("bad.jsonl"), "{\"text\": 5}\n");
    ct::CommandResult bad = cli("pack --input " + q(dir.file("bad.jsonl")) + " --tokenizer " +
                                    q(tok) + " --output " + q(out),
                                dir);
    CHECK(bad.exit_code == 4);
}

TEST_CASE("surgery grows a checkpoint and validates the old tokenizer") {
    ct::TempDir dir("cli_surgery");
    std::string tok = make_tokenizer(dir, "tok.json", {"ab ab ab"}, 8); // vocab 8

    cabrita::ModelConfig config;
    config.vocab_size = 8;
    config.d_model = 8;
    config.n_layers = 1;
    config.n_heads = 2;
    config.d_ff = 16;
    config.max_seq_len = 8;
    cabrita::save_checkpoint(cabrita::random_checkpoint(config, 3), dir.file("in.cbrt"));

    ct::CommandResult r = cli("surgery --checkpoint " + q(dir.file("in.cbrt")) + " --output " +
                                  q(dir.file("out.cbrt")) + " --tokenizer-old " + q(tok) +
                                  " --new-vocab 12 --init gaussian --sigma 0.01 --seed 5",
                              dir);
    CHECK(r.exit_code == 0);
    CHECK(r.err.find("max_abs_dev=0") != std::string::npos);
    cabrita::Checkpoint grown = cabrita::load_checkpoint(dir.file("out.cbrt"));
    CHECK(grown.config.vocab_size == 12);
    CHECK(grown.at("embedding").shape[0] == 12);

    // Old tokenizer with the wrong size is refused.
    std::string other = make_tokenizer(dir, "other.json", {"ab cd ab cd"}, 12);
    ct::CommandResult mismatch =
        cli("surgery --checkpoint " + q(dir.file("in.cbrt")) + " --output " +
                q(dir.file("out2.cbrt")) + " --tokenizer-old " + q(other) + " --new-vocab 12",
            dir);
    CHECK(mismatch.exit_code == 3);
    CHECK(mismatch.err.find("does not match checkpoint vocabulary") != std::string::npos);

    // No target size at all.
    ct::CommandResult no_target = cli("surgery --checkpoint " + q(dir.file("in.cbrt")) +
                                          " --output " + q(dir.file("out3.cbrt")),
                                      dir);
    CHECK(no_target.exit_code == 3);
}

TEST_CASE("toy-train runs from a fresh init and writes the trace") {
    ct::TempDir dir("cli_toy");
    std::vector<std::vector<uint32_t>> docs = {{2, 3, 4, 5, 2, 3}, {5, 4, 3, 2, 5, 4},
                                               {2, 2, 3, 3, 4, 4}};
    cabrita::save_packed(cabrita::pack(docs, 8, 0, 1), dir.file("packed.bin"));

    ct::CommandResult r = cli(
        "toy-train --data " + q(dir.file("packed.bin")) +
            " --init-vocab 6 --d-model 8 --n-layers 1 --n-heads 2 --d-ff 16 --seq-len 8"
            " --steps 3 --micro-batch 2 --warmup 1 --peak-lr 1e-2 --final-lr 1e-3"
            " --decay-steps 5 --checkpoint-out " +
            q(dir.file("trained.cbrt")) + " --trace " + q(dir.file("trace.csv")),
        dir);
    CHECK(r.exit_code == 0);
    std::string trace = ct::read_text_file(dir.file("trace.csv"));
    CHECK(trace.substr(0, 13) == "step,lr,loss\n");
    CHECK(trace.find("\n3,") != std::string::npos);
    cabrita::Checkpoint trained = cabrita::load_checkpoint(dir.file("trained.cbrt"));
    CHECK(trained.config.vocab_size == 6);

    // Without --checkpoint-in, --init-vocab is required.
    ct::CommandResult no_init = cli("toy-train --data " + q(dir.file("packed.bin")), dir);
    CHECK(no_init.exit_code == 3);
}

TEST_CASE("bench prints markdown and the reduction summary") {
    ct::TempDir dir("cli_bench");
    std::string base = make_tokenizer(dir, "base.json", {"stone stones stonework"}, 30);
    std::string adapted = make_tokenizer(dir, "adapted.json", {"pedra pedras pedreira"}, 30);
    ct::write_text_file(dir.file("pt.txt"), "pedra pedras pedreira pedra\n");
    ct::write_text_file(dir.file("en.txt"), "stone stones stonework stone\n");

    ct::CommandResult r = cli("bench --tokenizer base=" + base + " --tokenizer adapted=" +
                                  adapted + " --text-a " + q(dir.file("pt.txt")) + " --text-b " +
                                  q(dir.file("en.txt")) + " --base base --adapted adapted",
                              dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("| Model | Vocab Size | Tokens (B) | Tokens (A) |") != std::string::npos);
    CHECK(r.out.find("| base |") != std::string::npos);
    CHECK(r.out.find("| adapted |") != std::string::npos);
    CHECK(r.err.find("token reduction base -> adapted") != std::string::npos);

    // File outputs instead of stdout.
    ct::CommandResult files =
        cli("bench --tokenizer base=" + base + " --tokenizer adapted=" + adapted + " --text-a " +
                q(dir.file("pt.txt")) + " --text-b " + q(dir.file("en.txt")) + " --out " +
                q(dir.file("bench.md")) + " --csv " + q(dir.file("bench.csv")),
            dir);
    CHECK(files.exit_code == 0);
    CHECK(ct::read_text_file(dir.file("bench.md")).find("| Model |") != std::string::npos);
    CHECK(ct::read_text_file(dir.file("bench.csv")).find("model,vocab_size") !=
          std::string::npos);

    // Missing text file is a data error.
    ct::CommandResult gone = cli("bench --tokenizer base=" + base + " --text-a " +
                                     q(dir.file("absent.txt")) + " --text-b " +
                                     q(dir.file("en.txt")),
                                 dir);
    CHECK(gone.exit_code == 3);
}

TEST_CASE("config file mirrors flags, rejects unknown keys, and yields to flags") {
    ct::TempDir dir("cli_config");
    ct::write_text_file(dir.file("corpus.txt"), "ab ab ab\n");
    std::string configured_out = dir.file("from_config.json");

    ct::write_text_file(dir.file("run.toml"), "[train-tokenizer]\n"
                                              "input = [\"" +
                                                  dir.file("corpus.txt") + "\"]\n"
                                                  "output = \"" +
                                                  configured_out + "\"\n"
                                                  "vocab-size = 8\n");

    ct::CommandResult r =
        cli("--config " + q(dir.file("run.toml")) + " train-tokenizer", dir);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(configured_out));
    CHECK(cabrita::TokenizerModel::load(configured_out).vocab_size() == 8);

    // A flag on the command line beats the config value.
    std::string flag_out = dir.file("from_flag.json");
    ct::CommandResult over = cli("--config " + q(dir.file("run.toml")) +
                                     " train-tokenizer --output " + q(flag_out),
                                 dir);
    CHECK(over.exit_code == 0);
    CHECK(fs::exists(flag_out));

    // Unknown keys in the config are rejected.
    ct::write_text_file(dir.file("bad.toml"), "[train-tokenizer]\n"
                                              "output = \"x.json\"\n"
                                              "vocab-size = 8\n"
                                              "made-up-knob = true\n");
    ct::CommandResult bad =
        cli("--config " + q(dir.file("bad.toml")) + " train-tokenizer", dir);
    CHECK(bad.exit_code == 2);
}

TEST_CASE("end-to-end produces the full artifact set, byte-identical across runs") {
    ct::TempDir dir("cli_e2e");
    std::string data_dir = ct::source_root() + "/data";
    std::string common = "end-to-end --data-dir " + q(data_dir) + " --seed 42 --steps 2";

    ct::CommandResult first = cli(common + " --out-dir " + q(dir.file("run1")), dir);
    REQUIRE(first.exit_code == 0);
    ct::CommandResult second = cli(common + " --out-dir " + q(dir.file("run2")), dir);
    REQUIRE(second.exit_code == 0);

    const std::vector<std::string> artifacts = {
        "filter_report.txt",     "filter_report.json",      "tokenizer_base.json",
        "tokenizer_addon.json",  "tokenizer_merged.json",   "packed.bin",
        "packed.bin.json",       "checkpoint_base.cbrt",    "checkpoint_resized.cbrt",
        "checkpoint_trained.cbrt", "loss_trace.csv",        "bench_report.md",
        "bench_report.csv"};
    for (const std::string& name : artifacts) {
        std::string a = dir.file("run1/" + name);
        std::string b = dir.file("run2/" + name);
        REQUIRE_MESSAGE(fs::exists(a), name);
        REQUIRE_MESSAGE(fs::exists(b), name);
        CHECK_MESSAGE(ct::read_text_file(a) == ct::read_text_file(b), name);
    }

    // The training run logged a loss and the bench report is well formed.
    CHECK(first.err.find("last_loss=") != std::string::npos);
    CHECK(ct::read_text_file(dir.file("run1/bench_report.md")).find("| merged |") !=
          std::string::npos);
    std::string trace = ct::read_text_file(dir.file("run1/loss_trace.csv"));
    CHECK(trace.substr(0, 13) == "step,lr,loss\n");
}
