#pragma once

#include "autofeedback/error.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace autofeedback {

enum class ValueType { String, Int, Float, List, Tuple, Dict, Bool };

inline constexpr std::array<ValueType, 7> kAllValueTypes = {
    ValueType::String, ValueType::Int,  ValueType::Float, ValueType::List,
    ValueType::Tuple,  ValueType::Dict, ValueType::Bool};

/// Lower-case name used by the documentation schema ("string", "int", ...).
inline std::string_view to_string(ValueType t) {
    switch (t) {
        case ValueType::String: return "string";
        case ValueType::Int: return "int";
        case ValueType::Float: return "float";
        case ValueType::List: return "list";
        case ValueType::Tuple: return "tuple";
        case ValueType::Dict: return "dict";
        case ValueType::Bool: return "bool";
    }
    return "string";
}

inline std::optional<ValueType> parse_value_type(std::string_view s) {
    for (auto t : kAllValueTypes) {
        if (to_string(t) == s) return t;
    }
    return std::nullopt;
}

struct ParamSpec {
    std::string name;
    ValueType value_type = ValueType::String;
    std::string description;
    bool required = false;

    friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

struct ExceptionSpec {
    std::string code;
    std::string message;

    friend bool operator==(const ExceptionSpec&, const ExceptionSpec&) = default;
};

struct ApiSpec {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params;
    std::vector<ExceptionSpec> exceptions;

    const ParamSpec* find_param(std::string_view param) const {
        for (const auto& p : params) {
            if (p.name == param) return &p;
        }
        return nullptr;
    }

    friend bool operator==(const ApiSpec&, const ApiSpec&) = default;
};

/// Ordered collection of API specs. Order is the source order and is used
/// for every deterministic tie-break in retrieval and detection.
struct ApiDocument {
    std::vector<ApiSpec> apis;

    bool empty() const noexcept { return apis.empty(); }
    std::size_t size() const noexcept { return apis.size(); }

    /// Index of `name` in source order, if present.
    std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < apis.size(); ++i) {
            if (apis[i].name == name) return i;
        }
        return std::nullopt;
    }

    friend bool operator==(const ApiDocument&, const ApiDocument&) = default;
};

/// Exact, case-sensitive lookup.
inline const ApiSpec* lookup_api(const ApiDocument& doc, std::string_view name) {
    auto idx = doc.index_of(name);
    return idx ? &doc.apis[*idx] : nullptr;
}

/// Lower-cases `name` and drops every character outside [a-zA-Z].
/// "get_v2_Data!" -> "getvdata".
inline std::string normalize_name(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    for (unsigned char c : name) {
        if (std::isalpha(c) && c < 0x80) out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* key,
                                           const std::string& path) {
    if (!obj.is_object()) throw SchemaError(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path, std::string("missing field '") + key + "'");
    return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key,
                                  const std::string& path) {
    const auto& v = require_field(obj, key, path);
    if (!v.is_string()) throw SchemaError(path + "/" + key, "expected a string");
    return v.get<std::string>();
}

inline const nlohmann::json& require_array(const nlohmann::json& obj, const char* key,
                                           const std::string& path) {
    const auto& v = require_field(obj, key, path);
    if (!v.is_array()) throw SchemaError(path + "/" + key, "expected an array");
    return v;
}

} // namespace detail

/// Builds a document from parsed JSON in the documentation schema.
inline ApiDocument document_from_json(const nlohmann::json& root) {
    ApiDocument doc;
    const auto& apis = detail::require_array(root, "apis", "");
    std::unordered_set<std::string> names;
    for (std::size_t i = 0; i < apis.size(); ++i) {
        const std::string path = "/apis/" + std::to_string(i);
        const auto& a = apis[i];
        ApiSpec api;
        api.name = detail::require_string(a, "name", path);
        if (api.name.empty()) throw SchemaError(path + "/name", "API name is empty");
        if (!names.insert(api.name).second) {
            throw SchemaError(path + "/name", "duplicate API name '" + api.name + "'");
        }
        api.description = detail::require_string(a, "description", path);

        const auto& params = detail::require_array(a, "parameters", path);
        std::unordered_set<std::string> param_names;
        for (std::size_t j = 0; j < params.size(); ++j) {
            const std::string ppath = path + "/parameters/" + std::to_string(j);
            const auto& p = params[j];
            ParamSpec param;
            param.name = detail::require_string(p, "name", ppath);
            if (param.name.empty()) throw SchemaError(ppath + "/name", "parameter name is empty");
            if (!param_names.insert(param.name).second) {
                throw SchemaError(ppath + "/name", "duplicate parameter name '" + param.name + "'");
            }
            const auto type_name = detail::require_string(p, "type", ppath);
            auto type = parse_value_type(type_name);
            if (!type) throw SchemaError(ppath + "/type", "unknown value type '" + type_name + "'");
            param.value_type = *type;
            param.description = detail::require_string(p, "description", ppath);
            const auto& req = detail::require_field(p, "required", ppath);
            if (!req.is_boolean()) throw SchemaError(ppath + "/required", "expected a boolean");
            param.required = req.get<bool>();
            api.params.push_back(std::move(param));
        }

        const auto& excs = detail::require_array(a, "exceptions", path);
        for (std::size_t j = 0; j < excs.size(); ++j) {
            const std::string epath = path + "/exceptions/" + std::to_string(j);
            api.exceptions.push_back({detail::require_string(excs[j], "code", epath),
                                      detail::require_string(excs[j], "message", epath)});
        }
        doc.apis.push_back(std::move(api));
    }
    return doc;
}

inline nlohmann::json document_to_json(const ApiDocument& doc) {
    nlohmann::json apis = nlohmann::json::array();
    for (const auto& api : doc.apis) {
        nlohmann::json params = nlohmann::json::array();
        for (const auto& p : api.params) {
            params.push_back({{"name", p.name},
                              {"type", std::string(to_string(p.value_type))},
                              {"description", p.description},
                              {"required", p.required}});
        }
        nlohmann::json excs = nlohmann::json::array();
        for (const auto& e : api.exceptions) excs.push_back({{"code", e.code}, {"message", e.message}});
        apis.push_back({{"name", api.name},
                        {"description", api.description},
                        {"parameters", std::move(params)},
                        {"exceptions", std::move(excs)}});
    }
    return {{"apis", std::move(apis)}};
}

/// Parses documentation JSON text. Malformed JSON is reported as a SchemaError
/// at the root.
inline ApiDocument parse_document(std::string_view text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("", std::string("invalid JSON: ") + e.what());
    }
    return document_from_json(root);
}

/// Reads and parses a documentation file.
inline ApiDocument load_document(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open documentation file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_document(ss.str());
}

} // namespace autofeedback
