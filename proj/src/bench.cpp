#include "cabrita/bench.hpp"

#include <sstream>

#include "cabrita/error.hpp"
#include "cabrita/unicode.hpp"

namespace cabrita {

BenchResult run_bench(const std::vector<std::pair<std::string, const TokenizerModel*>>& tokenizers,
                      std::string_view text_a, std::string_view text_b) {
    if (text_a.empty() || text_b.empty()) throw DataError("bench: both texts must be non-empty");

    BenchResult result;
    result.words_a = static_cast<int64_t>(unicode::split_whitespace(text_a).size());
    result.words_b = static_cast<int64_t>(unicode::split_whitespace(text_b).size());
    if (result.words_a == 0 || result.words_b == 0)
        throw DataError("bench: both texts must contain at least one word");

    for (const auto& [name, model] : tokenizers) {
        if (!model) throw DataError("bench: null tokenizer for " + name);
        BenchEntry e;
        e.name = name;
        e.vocab_size = model->vocab_size();
        e.tokens_a = count_tokens(*model, text_a);
        e.tokens_b = count_tokens(*model, text_b);
        e.fertility_a = static_cast<double>(e.tokens_a) / static_cast<double>(result.words_a);
        e.fertility_b = static_cast<double>(e.tokens_b) / static_cast<double>(result.words_b);
        result.entries.push_back(std::move(e));
    }
    return result;
}

namespace {

const BenchEntry& entry_by_name(const BenchResult& result, const std::string& name) {
    for (const BenchEntry& e : result.entries)
        if (e.name == name) return e;
    throw DataError("bench: no tokenizer named " + name + " in the results");
}

} // namespace

ReductionReport reduction_report(const BenchResult& result, const std::string& base_name,
                                 const std::string& adapted_name) {
    const BenchEntry& base = entry_by_name(result, base_name);
    const BenchEntry& adapted = entry_by_name(result, adapted_name);
    if (base.tokens_a == 0 || base.tokens_b == 0)
        throw DataError("bench: base tokenizer produced zero tokens");

    ReductionReport r;
    r.base_name = base_name;
    r.adapted_name = adapted_name;
    r.reduction_a_pct = static_cast<double>(base.tokens_a - adapted.tokens_a) /
                        static_cast<double>(base.tokens_a) * 100.0;
    r.reduction_b_pct = static_cast<double>(base.tokens_b - adapted.tokens_b) /
                        static_cast<double>(base.tokens_b) * 100.0;
    return r;
}

std::string emit_table_markdown(const BenchResult& result) {
    std::ostringstream os;
    os << "| Model | Vocab Size | Tokens (B) | Tokens (A) |\n";
    os << "|---|---:|---:|---:|\n";
    for (const BenchEntry& e : result.entries)
        os << "| " << e.name << " | " << e.vocab_size << " | " << e.tokens_b << " | " << e.tokens_a
           << " |\n";
    return os.str();
}

std::string emit_table_csv(const BenchResult& result) {
    std::ostringstream os;
    os << "model,vocab_size,tokens_b,tokens_a\n";
    for (const BenchEntry& e : result.entries)
        os << e.name << ',' << e.vocab_size << ',' << e.tokens_b << ',' << e.tokens_a << '\n';
    return os.str();
}

} // namespace cabrita
