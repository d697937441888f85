#pragma once

#include "autofeedback/doc_model.hpp"
#include "autofeedback/error.hpp"
#include "autofeedback/request_codec.hpp"
#include "autofeedback/similarity.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace autofeedback {

struct ScoredApi {
    std::string api_name;
    double score = 0;

    friend bool operator==(const ScoredApi&, const ScoredApi&) = default;
};

/// Top-k APIs for an instruction, highest score first, ties in doc order.
struct RelevantSet {
    std::vector<ScoredApi> entries;

    bool contains(std::string_view name) const {
        return std::any_of(entries.begin(), entries.end(),
                           [&](const ScoredApi& e) { return e.api_name == name; });
    }

    friend bool operator==(const RelevantSet&, const RelevantSet&) = default;
};

/// Ranks APIs by similarity between `instruction` and each description.
inline RelevantSet retrieve_relevant_apis(std::string_view instruction, const ApiDocument& doc,
                                          const SimilarityModel& model, std::size_t k) {
    if (doc.empty()) throw EmptyDocument();
    if (k == 0) throw Error("k must be at least 1");
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        scored.emplace_back(model.score(instruction, doc.apis[i].description), i);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    RelevantSet out;
    for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
        out.entries.push_back({doc.apis[scored[i].second].name, scored[i].first});
    }
    return out;
}

/// Splits on `.`, `?` or `!` followed by whitespace, and on newlines.
/// Terminators stay with their sentence; empty pieces are dropped.
inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    auto push = [&](std::string_view s) {
        auto t = detail::trim(s);
        if (!t.empty()) out.emplace_back(t);
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\n') {
            push(text.substr(start, i - start));
            start = i + 1;
        } else if ((c == '.' || c == '?' || c == '!') && i + 1 < text.size() &&
                   detail::is_space(text[i + 1])) {
            push(text.substr(start, i + 1 - start));
            start = i + 1;
        }
    }
    push(text.substr(start));
    return out;
}

/// Sentence form of one exception entry, e.g. "Error 20000: Longitude precedes latitude."
inline std::string exception_sentence(const ExceptionSpec& e) {
    return "Error " + e.code + ": " + e.message;
}

/// Sentences of an API's description, parameter descriptions and exception
/// entries, in that order.
inline std::vector<std::string> api_sentences(const ApiSpec& api) {
    std::vector<std::string> out = split_sentences(api.description);
    for (const auto& p : api.params) {
        auto s = split_sentences(p.description);
        out.insert(out.end(), s.begin(), s.end());
    }
    for (const auto& e : api.exceptions) {
        auto s = split_sentences(exception_sentence(e));
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

struct Chunk {
    std::vector<std::string> sentences;
    std::string text;
    std::vector<double> vector;
};

/// Semantically chunked documentation, keyed by API name. Immutable after build.
class ChunkIndex {
public:
    const std::vector<Chunk>* chunks_for(std::string_view api_name) const {
        auto it = chunks_.find(std::string(api_name));
        return it == chunks_.end() ? nullptr : &it->second;
    }

    const std::map<std::string, std::vector<Chunk>>& all() const noexcept { return chunks_; }

private:
    friend ChunkIndex build_chunk_index(const ApiDocument&, const SimilarityModel&, double);
    std::map<std::string, std::vector<Chunk>> chunks_;
};

/// Greedy semantic chunking: a sentence extends the current chunk when its
/// similarity to the chunk's joined text reaches `chunk_threshold`.
inline ChunkIndex build_chunk_index(const ApiDocument& doc, const SimilarityModel& model,
                                    double chunk_threshold) {
    if (!(chunk_threshold > 0 && chunk_threshold < 1)) {
        throw Error("chunk threshold must lie in (0, 1)");
    }
    ChunkIndex index;
    for (const auto& api : doc.apis) {
        std::vector<Chunk> chunks;
        for (auto& sentence : api_sentences(api)) {
            if (!chunks.empty() && model.score(sentence, chunks.back().text) >= chunk_threshold) {
                chunks.back().text += " " + sentence;
                chunks.back().sentences.push_back(std::move(sentence));
            } else {
                Chunk c;
                c.text = sentence;
                c.sentences.push_back(std::move(sentence));
                chunks.push_back(std::move(c));
            }
        }
        for (auto& c : chunks) c.vector = model.embed(c.text);
        if (!chunks.empty()) index.chunks_[api.name] = std::move(chunks);
    }
    return index;
}

struct RetrievedMessage {
    std::string text;
    std::string source_api;
    double similarity = 0;
};

/// Nearest chunk of `api_name` to `query` by embedding cosine (exhaustive,
/// first chunk wins ties).
inline std::optional<RetrievedMessage> retrieve_error_message(std::string_view api_name,
                                                              std::string_view query,
                                                              const ChunkIndex& index,
                                                              const SimilarityModel& model) {
    const auto* chunks = index.chunks_for(api_name);
    if (!chunks || chunks->empty()) return std::nullopt;
    const auto q = model.embed(query);
    std::size_t best = 0;
    double best_score = -1;
    for (std::size_t i = 0; i < chunks->size(); ++i) {
        double s = cosine(q, (*chunks)[i].vector);
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return RetrievedMessage{(*chunks)[best].text, std::string(api_name), std::clamp(best_score, 0.0, 1.0)};
}

} // namespace autofeedback
