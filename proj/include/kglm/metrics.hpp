#pragma once
// Text metrics over the rule tokenizer: exact-match accuracy, ROUGE-N
// (clipped n-gram overlap), and BLEU with the documented zero-smoothing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "kglm/error.hpp"
#include "kglm/text.hpp"

namespace kglm {

inline std::string trim_ws(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double exact_match_acc(const std::vector<std::string>& predictions,
                              const std::vector<std::string>& golds) {
    if (predictions.size() != golds.size()) throw Error("exact_match_acc: length mismatch");
    if (predictions.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (trim_ws(predictions[i]) == trim_ws(golds[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

namespace detail {

inline std::unordered_map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& tokens,
                                                                 std::size_t n) {
    std::unordered_map<std::string, std::size_t> counts;
    if (tokens.size() < n || n == 0) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (std::size_t j = 1; j < n; ++j) {
            key.push_back('\x1f');
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

}  // namespace detail

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline RougeScore rouge_n(const std::string& candidate, const std::string& reference, std::size_t n) {
    if (n < 1) throw Error("rouge_n: n must be >= 1");
    auto cand = tokenize(candidate).tokens;
    auto ref = tokenize(reference).tokens;
    auto cc = detail::ngram_counts(cand, n);
    auto rc = detail::ngram_counts(ref, n);
    std::size_t cand_total = cand.size() >= n ? cand.size() - n + 1 : 0;
    std::size_t ref_total = ref.size() >= n ? ref.size() - n + 1 : 0;

    std::size_t overlap = 0;
    for (const auto& [gram, count] : cc) {
        auto it = rc.find(gram);
        if (it != rc.end()) overlap += std::min(count, it->second);
    }
    RougeScore s;
    if (cand_total > 0) s.precision = static_cast<double>(overlap) / static_cast<double>(cand_total);
    if (ref_total > 0) s.recall = static_cast<double>(overlap) / static_cast<double>(ref_total);
    if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

// Clipped n-gram precision BLEU. Orders beyond the candidate length are
// skipped (a two-token candidate is scored on n=1..2 even with max_n=4), so
// a candidate identical to its reference always scores 1. Among the scored
// orders a single zero precision zeroes the whole score; there is no add-k
// smoothing. Brevity penalty exp(1 - r/c) applies when the candidate is
// shorter than the closest reference (length ties pick the shorter).
inline double bleu(const std::string& candidate, const std::vector<std::string>& references,
                   std::size_t max_n = 4) {
    if (max_n < 1) throw Error("bleu: max_n must be >= 1");
    auto cand = tokenize(candidate).tokens;
    if (cand.empty() || references.empty()) return 0.0;

    std::vector<std::vector<std::string>> refs;
    refs.reserve(references.size());
    for (const auto& r : references) refs.push_back(tokenize(r).tokens);

    std::size_t top = std::min(max_n, cand.size());
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= top; ++n) {
        auto cc = detail::ngram_counts(cand, n);
        std::size_t total = cand.size() - n + 1;
        std::size_t clipped = 0;
        for (const auto& [gram, count] : cc) {
            std::size_t best = 0;
            for (const auto& ref : refs) {
                auto rc = detail::ngram_counts(ref, n);
                auto it = rc.find(gram);
                if (it != rc.end()) best = std::max(best, it->second);
            }
            clipped += std::min(count, best);
        }
        if (clipped == 0) return 0.0;
        log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }

    std::size_t c = cand.size();
    std::size_t r = refs[0].size();
    for (const auto& ref : refs) {
        std::size_t len = ref.size();
        auto gap = [&](std::size_t x) { return x > c ? x - c : c - x; };
        if (gap(len) < gap(r) || (gap(len) == gap(r) && len < r)) r = len;
    }
    double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
    return bp * std::exp(log_sum / static_cast<double>(top));
}

}  // namespace kglm
