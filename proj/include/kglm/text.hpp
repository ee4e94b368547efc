#pragma once
// Rule tokenizer, embedded stopword list, and document-frequency counting.
// The tokenizer is deliberately self-contained and deterministic: split on
// Unicode whitespace, strip leading/trailing punctuation per piece, lowercase
// ASCII. Internal punctuation (hyphens, apostrophes) survives.

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kglm {

struct Query {
    std::string raw;
    std::vector<std::string> tokens;
};

namespace detail {

// Decodes one UTF-8 code point starting at s[i], advancing i. Invalid bytes
// decode as themselves so tokenization never throws on dirty input.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
    unsigned char c0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) {
        return i + k < s.size() &&
               (static_cast<unsigned char>(s[i + k]) & 0xC0u) == 0x80u;
    };
    if (c0 < 0x80u) {
        ++i;
        return c0;
    }
    if ((c0 & 0xE0u) == 0xC0u && cont(1)) {
        char32_t cp = (char32_t(c0 & 0x1Fu) << 6) |
                      (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
        i += 2;
        return cp;
    }
    if ((c0 & 0xF0u) == 0xE0u && cont(1) && cont(2)) {
        char32_t cp = (char32_t(c0 & 0x0Fu) << 12) |
                      (char32_t(static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6) |
                      (static_cast<unsigned char>(s[i + 2]) & 0x3Fu);
        i += 3;
        return cp;
    }
    if ((c0 & 0xF8u) == 0xF0u && cont(1) && cont(2) && cont(3)) {
        char32_t cp = (char32_t(c0 & 0x07u) << 18) |
                      (char32_t(static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12) |
                      (char32_t(static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6) |
                      (static_cast<unsigned char>(s[i + 3]) & 0x3Fu);
        i += 4;
        return cp;
    }
    ++i;
    return c0;
}

inline void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80u) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800u) {
        out.push_back(static_cast<char>(0xC0u | (cp >> 6)));
        out.push_back(static_cast<char>(0x80u | (cp & 0x3Fu)));
    } else if (cp < 0x10000u) {
        out.push_back(static_cast<char>(0xE0u | (cp >> 12)));
        out.push_back(static_cast<char>(0x80u | ((cp >> 6) & 0x3Fu)));
        out.push_back(static_cast<char>(0x80u | (cp & 0x3Fu)));
    } else {
        out.push_back(static_cast<char>(0xF0u | (cp >> 18)));
        out.push_back(static_cast<char>(0x80u | ((cp >> 12) & 0x3Fu)));
        out.push_back(static_cast<char>(0x80u | ((cp >> 6) & 0x3Fu)));
        out.push_back(static_cast<char>(0x80u | (cp & 0x3Fu)));
    }
}

inline bool is_unicode_space(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x20: case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Punctuation classes stripped from token edges: ASCII punctuation plus the
// common general/CJK/fullwidth punctuation blocks.
inline bool is_edge_punct(char32_t cp) {
    if (cp < 0x80u) {
        char c = static_cast<char>(cp);
        return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
               (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
    }
    if (cp >= 0x00A1 && cp <= 0x00BF) return true;   // inverted marks, guillemets
    if (cp >= 0x2010 && cp <= 0x2027) return true;   // dashes, quotes, ellipsis
    if (cp >= 0x2030 && cp <= 0x205E) return true;
    if (cp >= 0x3001 && cp <= 0x303F) return true;   // CJK punctuation
    if (cp >= 0xFF01 && cp <= 0xFF0F) return true;   // fullwidth forms
    if (cp >= 0xFF1A && cp <= 0xFF20) return true;
    if (cp >= 0xFF3B && cp <= 0xFF40) return true;
    if (cp >= 0xFF5B && cp <= 0xFF65) return true;
    return false;
}

inline char32_t lower_ascii(char32_t cp) {
    return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
}

}  // namespace detail

inline Query tokenize(std::string_view text) {
    Query q;
    q.raw = std::string(text);

    std::vector<std::vector<char32_t>> pieces(1);
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = detail::decode_utf8(text, i);
        if (detail::is_unicode_space(cp)) {
            if (!pieces.back().empty()) pieces.emplace_back();
        } else {
            pieces.back().push_back(cp);
        }
    }

    for (auto& piece : pieces) {
        std::size_t b = 0, e = piece.size();
        while (b < e && detail::is_edge_punct(piece[b])) ++b;
        while (e > b && detail::is_edge_punct(piece[e - 1])) --e;
        if (b == e) continue;
        std::string token;
        for (std::size_t k = b; k < e; ++k)
            detail::encode_utf8(detail::lower_ascii(piece[k]), token);
        q.tokens.push_back(std::move(token));
    }
    return q;
}

// English stopword list (standard NLP toolkit set), lowercase.
inline const std::unordered_set<std::string>& english_stopwords() {
    static const std::unordered_set<std::string> words = {
        "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you",
        "you're", "you've", "you'll", "you'd", "your", "yours", "yourself",
        "yourselves", "he", "him", "his", "himself", "she", "she's", "her",
        "hers", "herself", "it", "it's", "its", "itself", "they", "them",
        "their", "theirs", "themselves", "what", "which", "who", "whom",
        "this", "that", "that'll", "these", "those", "am", "is", "are", "was",
        "were", "be", "been", "being", "have", "has", "had", "having", "do",
        "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
        "because", "as", "until", "while", "of", "at", "by", "for", "with",
        "about", "against", "between", "into", "through", "during", "before",
        "after", "above", "below", "to", "from", "up", "down", "in", "out",
        "on", "off", "over", "under", "again", "further", "then", "once",
        "here", "there", "when", "where", "why", "how", "all", "any", "both",
        "each", "few", "more", "most", "other", "some", "such", "no", "nor",
        "not", "only", "own", "same", "so", "than", "too", "very", "s", "t",
        "can", "will", "just", "don", "don't", "should", "should've", "now",
        "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't",
        "couldn", "couldn't", "didn", "didn't", "doesn", "doesn't", "hadn",
        "hadn't", "hasn", "hasn't", "haven", "haven't", "isn", "isn't", "ma",
        "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan",
        "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren",
        "weren't", "won", "won't", "wouldn", "wouldn't"};
    return words;
}

inline Query filter_stopwords(const Query& q,
                              const std::unordered_set<std::string>& stopwords =
                                  english_stopwords()) {
    Query out;
    out.raw = q.raw;
    out.tokens.reserve(q.tokens.size());
    for (const auto& t : q.tokens)
        if (!stopwords.count(t)) out.tokens.push_back(t);
    return out;
}

// Document frequencies over a reference corpus. df(w) counts documents whose
// token *set* contains w.
struct DocFreq {
    std::unordered_map<std::string, std::uint32_t> df;
    std::uint32_t n_docs = 0;

    std::uint32_t count(const std::string& token) const {
        auto it = df.find(token);
        return it == df.end() ? 0u : it->second;
    }
};

// df is counted at document level (a term repeated within one document adds
// 1). Terms are the normalized tokens plus adjacent-token bigrams joined by
// '_', mirroring the term space used for topic matching.
inline DocFreq build_doc_freq(const std::vector<std::string>& documents) {
    DocFreq out;
    out.n_docs = static_cast<std::uint32_t>(documents.size());
    for (const auto& doc : documents) {
        auto tokens = tokenize(doc).tokens;  // already lowercase, whitespace-free
        std::unordered_set<std::string> seen(tokens.begin(), tokens.end());
        for (std::size_t i = 0; i + 1 < tokens.size(); ++i) seen.insert(tokens[i] + "_" + tokens[i + 1]);
        for (const auto& term : seen) ++out.df[term];
    }
    return out;
}

}  // namespace kglm
