#pragma once

#include "autofeedback/doc_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace autofeedback {

/// Text similarity backend: `score` in [0, 1] and a fixed-length embedding.
/// Implementations must be safe for concurrent const calls.
class SimilarityModel {
public:
    virtual ~SimilarityModel() = default;

    virtual double score(std::string_view a, std::string_view b) const = 0;
    virtual std::vector<double> embed(std::string_view text) const = 0;
};

/// Lower-cased alphanumeric words. Identifiers are also split at camelCase
/// boundaries so that `userLogin` and `user_login` share words.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    auto is_upper = [](char c) { return c >= 'A' && c <= 'Z'; };
    auto is_lower = [](char c) { return c >= 'a' && c <= 'z'; };
    auto is_alnum = [&](char c) { return is_upper(c) || is_lower(c) || (c >= '0' && c <= '9'); };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (!is_alnum(c)) {
            flush();
            continue;
        }
        if (is_upper(c) && i > 0) {
            char prev = text[i - 1];
            bool next_lower = i + 1 < text.size() && is_lower(text[i + 1]);
            if (is_lower(prev) || (is_upper(prev) && next_lower)) flush();
        }
        cur.push_back(is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c);
    }
    flush();
    return out;
}

/// Cosine of two equal-length vectors; 0 when either is the zero vector.
inline double cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0, na = 0, nb = 0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// TF-IDF cosine similarity with smoothed IDF, `ln((1 + N) / (1 + df)) + 1`,
/// fitted on a fixed corpus. Words outside the corpus get the maximal IDF in
/// `score`; `embed` has one dimension per corpus word and drops them.
class TfIdfModel final : public SimilarityModel {
public:
    explicit TfIdfModel(std::span<const std::string> corpus) {
        std::map<std::string, std::size_t> df;
        for (const auto& doc : corpus) {
            auto toks = tokenize(doc);
            std::sort(toks.begin(), toks.end());
            toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
            for (auto& t : toks) ++df[t];
        }
        const double n = static_cast<double>(corpus.size());
        unseen_idf_ = std::log(1.0 + n) + 1.0;
        std::size_t index = 0;
        for (const auto& [term, count] : df) {
            vocab_.emplace(term, Entry{index++, std::log((1.0 + n) / (1.0 + static_cast<double>(count))) + 1.0});
        }
    }

    double idf(std::string_view term) const {
        auto it = vocab_.find(std::string(term));
        return it == vocab_.end() ? unseen_idf_ : it->second.idf;
    }

    std::size_t dimension() const noexcept { return vocab_.size(); }

    double score(std::string_view a, std::string_view b) const override {
        auto va = weights(a);
        auto vb = weights(b);
        if (va.empty() || vb.empty()) return (va.empty() && vb.empty() && a == b && !a.empty()) ? 1.0 : 0.0;
        double dot = 0, na = 0, nb = 0;
        for (const auto& [t, w] : va) {
            na += w * w;
            auto it = vb.find(t);
            if (it != vb.end()) dot += w * it->second;
        }
        for (const auto& [t, w] : vb) nb += w * w;
        return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
    }

    std::vector<double> embed(std::string_view text) const override {
        std::vector<double> v(vocab_.size(), 0.0);
        double norm = 0;
        for (const auto& [t, w] : weights(text)) {
            auto it = vocab_.find(t);
            if (it == vocab_.end()) continue;
            v[it->second.index] = w;
            norm += w * w;
        }
        if (norm > 0) {
            norm = std::sqrt(norm);
            for (auto& x : v) x /= norm;
        }
        return v;
    }

private:
    struct Entry {
        std::size_t index;
        double idf;
    };

    std::map<std::string, double> weights(std::string_view text) const {
        std::map<std::string, double> tf;
        for (auto& t : tokenize(text)) tf[t] += 1.0;
        for (auto& [t, w] : tf) w *= idf(t);
        return tf;
    }

    std::unordered_map<std::string, Entry> vocab_;
    double unseen_idf_ = 1.0;
};

/// All documentation text attached to one API, used as its IDF corpus entry.
inline std::string api_corpus_text(const ApiSpec& api) {
    std::string text = api.name + " " + api.description;
    for (const auto& p : api.params) text += " " + p.name + " " + p.description;
    for (const auto& e : api.exceptions) text += " " + e.code + " " + e.message;
    return text;
}

/// TF-IDF model whose IDF is fitted on the document, one corpus entry per API.
inline TfIdfModel default_similarity(const ApiDocument& doc) {
    std::vector<std::string> corpus;
    corpus.reserve(doc.size());
    for (const auto& api : doc.apis) corpus.push_back(api_corpus_text(api));
    return TfIdfModel(corpus);
}

} // namespace autofeedback
