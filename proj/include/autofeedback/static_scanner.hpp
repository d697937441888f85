#pragma once

#include "autofeedback/doc_model.hpp"
#include "autofeedback/error.hpp"
#include "autofeedback/request_codec.hpp"
#include "autofeedback/retrieval.hpp"
#include "autofeedback/similarity.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace autofeedback {

enum class ErrorType {
    E1,
    E2_1,
    E2_2,
    E2_3,
    E2_OTHER,
    E3_1,
    E3_2,
    E3_3,
    E3_OTHER,
    E4_1,
    E4_OTHER,
    NONE,
};

inline constexpr std::array<ErrorType, 12> kAllErrorTypes = {
    ErrorType::E1,   ErrorType::E2_1, ErrorType::E2_2,     ErrorType::E2_3,
    ErrorType::E2_OTHER, ErrorType::E3_1, ErrorType::E3_2, ErrorType::E3_3,
    ErrorType::E3_OTHER, ErrorType::E4_1, ErrorType::E4_OTHER, ErrorType::NONE};

inline std::string_view to_string(ErrorType t) {
    switch (t) {
        case ErrorType::E1: return "E1";
        case ErrorType::E2_1: return "E2.1";
        case ErrorType::E2_2: return "E2.2";
        case ErrorType::E2_3: return "E2.3";
        case ErrorType::E2_OTHER: return "E2.other";
        case ErrorType::E3_1: return "E3.1";
        case ErrorType::E3_2: return "E3.2";
        case ErrorType::E3_3: return "E3.3";
        case ErrorType::E3_OTHER: return "E3.other";
        case ErrorType::E4_1: return "E4.1";
        case ErrorType::E4_OTHER: return "E4.other";
        case ErrorType::NONE: return "NONE";
    }
    return "NONE";
}

inline std::optional<ErrorType> parse_error_type(std::string_view s) {
    for (auto t : kAllErrorTypes) {
        if (to_string(t) == s) return t;
    }
    return std::nullopt;
}

/// Error family: 1 for E1, 2 for E2.x, ..., 5 for NONE.
inline int error_family(ErrorType t) {
    switch (t) {
        case ErrorType::E1: return 1;
        case ErrorType::E2_1: case ErrorType::E2_2: case ErrorType::E2_3: case ErrorType::E2_OTHER: return 2;
        case ErrorType::E3_1: case ErrorType::E3_2: case ErrorType::E3_3: case ErrorType::E3_OTHER: return 3;
        case ErrorType::E4_1: case ErrorType::E4_OTHER: return 4;
        case ErrorType::NONE: return 5;
    }
    return 5;
}

/// Result of one detection pass. The three return-value fields follow the
/// per-type arity of `satisfies_return_arity`; the remaining fields are
/// context for rendering feedback.
struct DetectionFinding {
    ErrorType error_type = ErrorType::NONE;
    std::optional<std::string> offending_name;
    std::optional<std::string> suggested_name;
    std::optional<std::string> param_description;
    RelevantSet relevant_apis;

    std::optional<ParseFailure> parse_failure;  // E1 only
    std::string parse_detail;                   // E1 only
    std::optional<std::string> request_api;     // E3/E4: API named by the request
    std::optional<std::string> value_param;     // E4: parameter holding v1
    bool missing_parameter = false;             // E3.other raised for a missing required parameter
};

/// Which return values each error type carries.
inline bool satisfies_return_arity(const DetectionFinding& f) {
    const bool off = f.offending_name.has_value();
    const bool sug = f.suggested_name.has_value();
    const bool desc = f.param_description.has_value();
    switch (f.error_type) {
        case ErrorType::E1:
        case ErrorType::NONE:
            return !off && !sug && !desc;
        case ErrorType::E2_1: case ErrorType::E2_OTHER:
        case ErrorType::E3_1: case ErrorType::E3_OTHER:
            return off && !sug && !desc;
        case ErrorType::E2_2: case ErrorType::E2_3:
        case ErrorType::E3_2: case ErrorType::E3_3:
            return off && sug && !desc;
        case ErrorType::E4_1: case ErrorType::E4_OTHER:
            return off && !sug && desc;
    }
    return false;
}

struct DetectOptions {
    std::size_t k = 1;
    double threshold = 0.5;
    TypeRules type_rules{};
};

namespace detail {

/// Similarity of a generated identifier to a documented one. Identifiers
/// alone rarely share words with a synonym, so the documented side is also
/// scored together with its description and the better score is kept.
inline double identifier_similarity(const SimilarityModel& model, std::string_view generated,
                                    std::string_view documented, std::string_view description) {
    double bare = model.score(generated, documented);
    if (description.empty()) return bare;
    std::string expanded(documented);
    expanded += ' ';
    expanded += description;
    return std::max(bare, model.score(generated, expanded));
}

struct Suggestion {
    std::string name;
    double score;
};

/// Highest-similarity parameter of `api` strictly above `threshold`.
inline std::optional<Suggestion> similar_param(const SimilarityModel& model, const ApiSpec& api,
                                               std::string_view key, double threshold) {
    std::optional<Suggestion> best;
    for (const auto& p : api.params) {
        double s = identifier_similarity(model, key, p.name, p.description);
        if (s > threshold && (!best || s > best->score)) best = Suggestion{p.name, s};
    }
    return best;
}

/// Name-stage cascade once the generated name is known to be wrong. A name
/// documented anywhere is E2.1; `targets` are searched for E2.2 and E2.3.
inline DetectionFinding name_cascade(const SimilarityModel& model, const ApiDocument& doc,
                                     const std::string& name,
                                     const std::vector<const ApiSpec*>& targets, double threshold) {
    DetectionFinding f;
    f.offending_name = name;
    if (lookup_api(doc, name)) {
        f.error_type = ErrorType::E2_1;
        return f;
    }
    const auto norm = normalize_name(name);
    if (!norm.empty()) {
        for (const auto* api : targets) {
            if (normalize_name(api->name) == norm) {
                f.error_type = ErrorType::E2_2;
                f.suggested_name = api->name;
                return f;
            }
        }
    }
    std::optional<Suggestion> best;
    for (const auto* api : targets) {
        double s = identifier_similarity(model, name, api->name, api->description);
        if (s > threshold && (!best || s > best->score)) best = Suggestion{api->name, s};
    }
    if (best) {
        f.error_type = ErrorType::E2_3;
        f.suggested_name = best->name;
        return f;
    }
    f.error_type = ErrorType::E2_OTHER;
    return f;
}

/// Unknown-key stage. Sub-classes are tried in ascending order and,
/// within one sub-class, unknown keys in request order.
inline std::optional<DetectionFinding> param_cascade(const SimilarityModel& model,
                                                     const ApiDocument& doc, const ApiSpec& api,
                                                     const ApiRequest& req, double threshold) {
    std::vector<const std::string*> unknown;
    for (const auto& a : req.args) {
        if (!api.find_param(a.key)) unknown.push_back(&a.key);
    }
    auto finding = [&](ErrorType t, const std::string& off) {
        DetectionFinding f;
        f.error_type = t;
        f.offending_name = off;
        f.request_api = api.name;
        return f;
    };

    if (!unknown.empty()) {
        for (const auto* key : unknown) {
            for (const auto& other : doc.apis) {
                if (other.name != api.name && other.find_param(*key)) return finding(ErrorType::E3_1, *key);
            }
        }
        // The named API's own parameters are searched first, then the rest in doc order.
        std::vector<const ApiSpec*> order{&api};
        for (const auto& other : doc.apis) {
            if (other.name != api.name) order.push_back(&other);
        }
        for (const auto* key : unknown) {
            const auto norm = normalize_name(*key);
            if (norm.empty()) continue;
            for (const auto* candidate : order) {
                for (const auto& p : candidate->params) {
                    if (normalize_name(p.name) == norm) {
                        auto f = finding(ErrorType::E3_2, *key);
                        f.suggested_name = p.name;
                        return f;
                    }
                }
            }
        }
        for (const auto* key : unknown) {
            if (auto s = similar_param(model, api, *key, threshold)) {
                auto f = finding(ErrorType::E3_3, *key);
                f.suggested_name = s->name;
                return f;
            }
        }
        return finding(ErrorType::E3_OTHER, *unknown.front());
    }
    return std::nullopt;
}

/// First required parameter the request omits. Runs after the value check.
inline std::optional<DetectionFinding> missing_required(const ApiSpec& api, const ApiRequest& req) {
    for (const auto& p : api.params) {
        if (p.required && !req.find_arg(p.name)) {
            DetectionFinding f;
            f.error_type = ErrorType::E3_OTHER;
            f.offending_name = p.name;
            f.request_api = api.name;
            f.missing_parameter = true;
            return f;
        }
    }
    return std::nullopt;
}

inline std::optional<DetectionFinding> value_type_check(const ApiSpec& api, const ApiRequest& req,
                                                        const TypeRules& rules) {
    for (const auto& a : req.args) {
        const auto* p = api.find_param(a.key);
        if (p && !is_compatible(a.value, p->value_type, rules)) {
            DetectionFinding f;
            f.error_type = ErrorType::E4_1;
            f.offending_name = serialize_value(a.value);
            f.param_description = p->description;
            f.request_api = api.name;
            f.value_param = a.key;
            return f;
        }
    }
    return std::nullopt;
}

} // namespace detail

/// Static error detection. Stages run E1, E2, E3, E4 and stop at the first
/// hit; a missing required parameter is reported last, as E3.other; NONE means the request names a relevant API with documented keys,
/// all required parameters, and type-compatible values.
inline DetectionFinding detect(const ParseOutcome& outcome, std::string_view instruction,
                               const ApiDocument& doc, const SimilarityModel& model,
                               const DetectOptions& opts = {}) {
    if (doc.empty()) throw EmptyDocument();
    if (!outcome.parsed()) {
        DetectionFinding f;
        f.error_type = ErrorType::E1;
        f.parse_failure = outcome.failure().reason;
        f.parse_detail = outcome.failure().detail;
        return f;
    }
    const auto& req = outcome.request();
    auto relevant = retrieve_relevant_apis(instruction, doc, model, opts.k);

    if (!relevant.contains(req.name)) {
        std::vector<const ApiSpec*> targets;
        for (const auto& api : doc.apis) targets.push_back(&api);
        auto f = detail::name_cascade(model, doc, req.name, targets, opts.threshold);
        f.relevant_apis = std::move(relevant);
        return f;
    }

    const ApiSpec& api = *lookup_api(doc, req.name);
    if (auto f = detail::param_cascade(model, doc, api, req, opts.threshold)) {
        f->relevant_apis = std::move(relevant);
        return *f;
    }
    if (auto f = detail::value_type_check(api, req, opts.type_rules)) {
        f->relevant_apis = std::move(relevant);
        return *f;
    }
    if (auto f = detail::missing_required(api, req)) {
        f->relevant_apis = std::move(relevant);
        return *f;
    }
    DetectionFinding none;
    none.relevant_apis = std::move(relevant);
    return none;
}

/// Offline classification of a generated request against a known-correct
/// request, using the same stage order as `detect`.
inline ErrorType classify_against_truth(const ParseOutcome& generated, const ApiRequest& truth,
                                        const ApiDocument& doc, const SimilarityModel& model,
                                        double threshold = 0.5, const TypeRules& rules = {}) {
    const ApiSpec* truth_api = lookup_api(doc, truth.name);
    if (!truth_api) throw UnknownTruthApi(truth.name);
    if (!generated.parsed()) return ErrorType::E1;
    const auto& req = generated.request();

    if (req.name != truth.name) {
        return detail::name_cascade(model, doc, req.name, {truth_api}, threshold).error_type;
    }
    if (auto f = detail::param_cascade(model, doc, *truth_api, req, threshold)) return f->error_type;
    if (auto f = detail::value_type_check(*truth_api, req, rules)) return f->error_type;
    if (auto f = detail::missing_required(*truth_api, req)) return f->error_type;

    bool same = req.args.size() == truth.args.size();
    for (std::size_t i = 0; same && i < truth.args.size(); ++i) {
        const auto* v = req.find_arg(truth.args[i].key);
        same = v && values_equivalent(*v, truth.args[i].value, rules);
    }
    return same ? ErrorType::NONE : ErrorType::E4_OTHER;
}

} // namespace autofeedback
