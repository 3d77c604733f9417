#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

namespace cabrita::testing {

inline std::string numbered_word(const std::string& stem, int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d", i);
    return stem + buf;
}

// 250 distinct 10-codepoint words plus the stopwords "de a"; one line.
// 252 words, 252 unique, mean length 9.93, all alphabetic: passes every
// filter.
inline std::string good_text() {
    std::string text;
    for (int i = 0; i < 250; ++i) {
        if (i) text += ' ';
        text += numbered_word("palavra", i);
    }
    text += " de a";
    return text;
}

// Expected per-filter counts for crafted_corpus(), derived by hand from the
// document definitions below.
struct CraftedCorpusCounts {
    int64_t total = 12;
    int64_t kept = 1;
    int64_t at_least_one = 11;
    int64_t unique_tokens_lt_200 = 3;
    int64_t words_outside_50_100000 = 4;
    int64_t words_lt_50 = 3;
    int64_t words_gt_100000 = 1;
    int64_t alpha_word_ratio_lt_80 = 1;
    int64_t ellipsis_lines_gt_30 = 2;
    int64_t mean_word_len_outside_3_10 = 2;
    int64_t stopwords_lt_2 = 3;
    int64_t symbol_ratio_gt_0_1 = 2;
    int64_t bullet_lines_gt_90 = 1;
};

// The hand-labeled 12-document corpus. Index 0 is the only clean document.
//
// Hand-derived flag counts:
//   unique<200: 3 (tiny-pt, tiny-en, tiny-ellipsis)
//   words<50: 3 (same three)       words>100k: 1 (giant)   outside: 4
//   alpha<0.8: 1 (numeric)         ellipsis>0.3: 2 (tiny-ellipsis, dotted)
//   mean outside [3,10]: 2 (long-words, short-words)
//   stopwords<2: 3 (tiny-en, tiny-ellipsis, no-stopwords)
//   symbol>0.1: 2 (tiny-ellipsis, hashes)   bullets>0.9: 1 (bullets)
//   at least one: 11   kept: 1
inline std::vector<std::string> crafted_corpus() {
    std::vector<std::string> docs;

    docs.push_back(good_text()); // 0: kept

    // 1: tiny-pt — 6 words. unique<200, words<50. Two stopword hits (de, e),
    // mean 20/6 = 3.33, all alphabetic.
    docs.push_back("casa de ouro e prata azul");

    // 2: tiny-en — 4 words, no Portuguese stopwords. unique<200, words<50,
    // stopwords<2. Mean 18/4 = 4.5.
    docs.push_back("gold house blue stone");

    // 3: tiny-ellipsis — 5 words over 3 lines, 2 ending with "...".
    // unique<200, words<50, ellipsis 2/3, symbols 2/5 = 0.4, stopwords 0
    // ("adiante" is deliberately absent from the bundled stopword list).
    // Mean 39/5 = 7.8.
    docs.push_back("continua adiante...\ncontinua adiante...\nfim");

    // 4: no-stopwords — the good document without its stopword tail.
    // Mean exactly 10.0 sits inside the inclusive [3,10] band.
    {
        std::string text;
        for (int i = 0; i < 250; ++i) {
            if (i) text += ' ';
            text += numbered_word("palavra", i);
        }
        docs.push_back(text);
    }

    // 5: long-words — 250 distinct 12-codepoint words + "de a";
    // mean 3003/252 = 11.92 > 10.
    {
        std::string text;
        for (int i = 0; i < 250; ++i) {
            if (i) text += ' ';
            text += numbered_word("aaaaaaaaa", i);
        }
        text += " de a";
        docs.push_back(text);
    }

    // 6: short-words — 250 distinct two-letter words over 16 letters;
    // mean 2 < 3. "de" (index 52) and "da" (index 48) are stopword hits.
    {
        const std::string letters = "abcdefghijklmnop";
        std::string text;
        for (int i = 0; i < 250; ++i) {
            if (i) text += ' ';
            text += letters[static_cast<std::size_t>(i / 16)];
            text += letters[static_cast<std::size_t>(i % 16)];
        }
        docs.push_back(text);
    }

    // 7: numeric — 175 alphabetic words + 75 digit-only words + "de a";
    // alpha ratio 177/252 = 0.70 < 0.8. Mean 2128/252 = 8.44.
    {
        std::string text;
        for (int i = 0; i < 175; ++i) {
            if (i) text += ' ';
            text += numbered_word("palavra", i);
        }
        for (int i = 0; i < 75; ++i) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%05d", 10000 + i);
            text += ' ';
            text += buf;
        }
        text += " de a";
        docs.push_back(text);
    }

    // 8: dotted — ten 25-word lines, four ending with a standalone "...";
    // ellipsis 4/10 = 0.4 > 0.3 but symbols 4/256 stay under 0.1.
    // Mean 2515/256 = 9.82.
    {
        std::string text;
        for (int line = 0; line < 10; ++line) {
            if (line) text += '\n';
            for (int w = 0; w < 25; ++w) {
                if (w) text += ' ';
                text += numbered_word("palavra", line * 25 + w);
            }
            if (line % 2 == 1 && line <= 7) text += " ...";
        }
        text += " de a";
        docs.push_back(text);
    }

    // 9: hashes — the good words plus 30 '#' marks: 30/282 = 0.106 > 0.1.
    // Alpha ratio 252/282 = 0.89 stays above 0.8. Mean 2533/282 = 8.98.
    {
        std::string text = good_text();
        for (int i = 0; i < 30; ++i) text += " #";
        docs.push_back(text);
    }

    // 10: bullets — ten lines, all starting with "*": 10/10 > 0.9.
    // Mean 2513/262 = 9.59; alpha 252/262 = 0.96.
    {
        std::string text;
        for (int line = 0; line < 10; ++line) {
            if (line) text += '\n';
            text += "*";
            for (int w = 0; w < 25; ++w) {
                text += ' ';
                text += numbered_word("palavra", line * 25 + w);
            }
        }
        text += " de a";
        docs.push_back(text);
    }

    // 11: giant — 401 repetitions of the 250-word cycle + "de a" =
    // 100,252 words > 100,000. Unique count stays at 252.
    {
        std::string text;
        text.reserve(1200000);
        for (int rep = 0; rep < 401; ++rep) {
            for (int i = 0; i < 250; ++i) {
                if (rep || i) text += ' ';
                text += numbered_word("palavra", i);
            }
        }
        text += " de a";
        docs.push_back(text);
    }

    return docs;
}

inline std::string corpus_as_ndjson(const std::vector<std::string>& docs) {
    std::string out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        nlohmann::json obj;
        obj["id"] = "doc-" + std::to_string(i);
        obj["text"] = docs[i];
        out += obj.dump();
        out += '\n';
    }
    return out;
}

} // namespace cabrita::testing
