#pragma once

#include "autofeedback/doc_model.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace autofeedback {

inline constexpr std::string_view kOpenMarker = "<<API>>";
inline constexpr std::string_view kCloseMarker = "<</API>>";

struct Value;

struct ListValue {
    std::vector<Value> items;
};

struct TupleValue {
    std::vector<Value> items;
};

/// Dict entries keep insertion order so serialization round-trips.
struct DictValue {
    std::vector<std::pair<std::string, Value>> entries;
};

/// A literal argument value: string, int, float, list, tuple, dict or bool.
struct Value {
    using Storage =
        std::variant<std::string, std::int64_t, double, ListValue, TupleValue, DictValue, bool>;
    Storage data;

    Value() : data(std::string{}) {}
    Value(std::string s) : data(std::move(s)) {}
    Value(const char* s) : data(std::string(s)) {}
    Value(std::int64_t i) : data(i) {}
    Value(int i) : data(static_cast<std::int64_t>(i)) {}
    Value(double d) : data(d) {}
    Value(bool b) : data(b) {}
    Value(ListValue l) : data(std::move(l)) {}
    Value(TupleValue t) : data(std::move(t)) {}
    Value(DictValue d) : data(std::move(d)) {}

    template <class T>
    bool is() const noexcept { return std::holds_alternative<T>(data); }
    template <class T>
    const T& as() const { return std::get<T>(data); }
};

// Structural equality: same variant, same contents, same order.
inline bool operator==(const Value& a, const Value& b);
inline bool operator==(const ListValue& a, const ListValue& b) { return a.items == b.items; }
inline bool operator==(const TupleValue& a, const TupleValue& b) { return a.items == b.items; }
inline bool operator==(const DictValue& a, const DictValue& b) { return a.entries == b.entries; }
inline bool operator==(const Value& a, const Value& b) { return a.data == b.data; }

struct Argument {
    std::string key;
    Value value;

    friend bool operator==(const Argument&, const Argument&) = default;
};

/// Parsed `NAME(key1=value1, key2=value2, ...)`.
struct ApiRequest {
    std::string name;
    std::vector<Argument> args;

    const Value* find_arg(std::string_view key) const {
        for (const auto& a : args) {
            if (a.key == key) return &a.value;
        }
        return nullptr;
    }

    friend bool operator==(const ApiRequest&, const ApiRequest&) = default;
};

enum class ParseFailure { NoBlock, BadSyntax, DuplicateKey };

inline std::string_view to_string(ParseFailure f) {
    switch (f) {
        case ParseFailure::NoBlock: return "NoBlock";
        case ParseFailure::BadSyntax: return "BadSyntax";
        case ParseFailure::DuplicateKey: return "DuplicateKey";
    }
    return "BadSyntax";
}

struct Unparseable {
    ParseFailure reason = ParseFailure::BadSyntax;
    std::string raw_text;
    std::string detail;
};

/// Either a parsed request or the reason it could not be parsed.
class ParseOutcome {
public:
    ParseOutcome(ApiRequest req) : v_(std::move(req)) {}
    ParseOutcome(Unparseable u) : v_(std::move(u)) {}

    bool parsed() const noexcept { return std::holds_alternative<ApiRequest>(v_); }
    const ApiRequest& request() const { return std::get<ApiRequest>(v_); }
    const Unparseable& failure() const { return std::get<Unparseable>(v_); }

private:
    std::variant<ApiRequest, Unparseable> v_;
};

namespace detail {

inline bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

/// Position just past the closing paren matching text[open], honoring quoted
/// strings, or npos if unbalanced.
inline std::size_t match_paren(std::string_view text, std::size_t open) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = open; i < text.size(); ++i) {
        char c = text[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        if (c == '"' || c == '\'') quote = c;
        else if (c == '(') ++depth;
        else if (c == ')' && --depth == 0) return i + 1;
    }
    return std::string_view::npos;
}

struct SyntaxError {
    ParseFailure reason;
    std::string message;
};

/// Recursive-descent parser over one request block. Throws SyntaxError
/// internally; parse_request converts to Unparseable.
class RequestParser {
public:
    explicit RequestParser(std::string_view text) : s_(text) {}

    ApiRequest parse() {
        ApiRequest req;
        skip_ws();
        req.name = identifier("API name");
        skip_ws();
        expect('(');
        skip_ws();
        if (!consume(')')) {
            for (;;) {
                skip_ws();
                std::size_t key_pos = pos_;
                if (pos_ < s_.size() && !is_ident_start(s_[pos_])) {
                    fail("expected a keyword argument at offset " + std::to_string(pos_));
                }
                std::string key = identifier("parameter name");
                skip_ws();
                if (!consume('=')) {
                    fail("positional or malformed argument at offset " + std::to_string(key_pos));
                }
                skip_ws();
                Value v = literal(0);
                for (const auto& a : req.args) {
                    if (a.key == key) {
                        throw SyntaxError{ParseFailure::DuplicateKey,
                                          "duplicate parameter '" + key + "'"};
                    }
                }
                req.args.push_back({std::move(key), std::move(v)});
                skip_ws();
                if (consume(')')) break;
                expect(',');
            }
        }
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected trailing text at offset " + std::to_string(pos_));
        return req;
    }

private:
    static constexpr int kMaxDepth = 64;

    [[noreturn]] void fail(std::string msg) { throw SyntaxError{ParseFailure::BadSyntax, std::move(msg)}; }

    void skip_ws() {
        while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
    }

    bool consume(char c) {
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!consume(c)) {
            fail(std::string("expected '") + c + "' at offset " + std::to_string(pos_));
        }
    }

    std::string identifier(const char* what) {
        if (pos_ >= s_.size() || !is_ident_start(s_[pos_])) {
            fail(std::string("expected ") + what + " at offset " + std::to_string(pos_));
        }
        std::size_t start = pos_;
        while (pos_ < s_.size() && is_ident_char(s_[pos_])) ++pos_;
        return std::string(s_.substr(start, pos_ - start));
    }

    Value literal(int depth) {
        if (depth > kMaxDepth) fail("literal nesting too deep");
        if (pos_ >= s_.size()) fail("expected a value at end of input");
        char c = s_[pos_];
        if (c == '"' || c == '\'') return Value(string_literal());
        if (c == '[') {
            ++pos_;
            return Value(ListValue{sequence(']', depth)});
        }
        if (c == '(') {
            ++pos_;
            return Value(TupleValue{sequence(')', depth)});
        }
        if (c == '{') {
            ++pos_;
            return Value(dict(depth));
        }
        if (c == '-' || c == '+' || c == '.' || (c >= '0' && c <= '9')) return number();
        if (is_ident_start(c)) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && is_ident_char(s_[pos_])) ++pos_;
            std::string word(s_.substr(start, pos_ - start));
            for (auto& ch : word) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
            if (word == "true") return Value(true);
            if (word == "false") return Value(false);
            pos_ = start;
            fail("unsupported bare word at offset " + std::to_string(start));
        }
        fail(std::string("unexpected character '") + c + "' at offset " + std::to_string(pos_));
    }

    std::vector<Value> sequence(char close, int depth) {
        std::vector<Value> items;
        skip_ws();
        if (consume(close)) return items;
        for (;;) {
            skip_ws();
            items.push_back(literal(depth + 1));
            skip_ws();
            if (consume(close)) return items;
            expect(',');
            skip_ws();
            if (consume(close)) return items;  // trailing comma
        }
    }

    DictValue dict(int depth) {
        DictValue d;
        skip_ws();
        if (consume('}')) return d;
        for (;;) {
            skip_ws();
            if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) {
                fail("dict keys must be quoted strings (offset " + std::to_string(pos_) + ")");
            }
            std::string key = string_literal();
            skip_ws();
            expect(':');
            skip_ws();
            d.entries.emplace_back(std::move(key), literal(depth + 1));
            skip_ws();
            if (consume('}')) return d;
            expect(',');
            skip_ws();
            if (consume('}')) return d;
        }
    }

    std::string string_literal() {
        char quote = s_[pos_++];
        std::string out;
        while (pos_ < s_.size()) {
            char c = s_[pos_++];
            if (c == quote) return out;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (pos_ >= s_.size()) break;
            char e = s_[pos_++];
            switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case '0': out.push_back('\0'); break;
                case '\\': case '\'': case '"': out.push_back(e); break;
                default:
                    out.push_back('\\');
                    out.push_back(e);
            }
        }
        fail("unterminated string literal");
    }

    Value number() {
        std::size_t start = pos_;
        if (s_[pos_] == '+' || s_[pos_] == '-') ++pos_;
        bool is_float = false;
        bool digits = false;
        while (pos_ < s_.size()) {
            char c = s_[pos_];
            if (c >= '0' && c <= '9') {
                digits = true;
                ++pos_;
            } else if (c == '.' || c == 'e' || c == 'E') {
                is_float = true;
                ++pos_;
                if ((c == 'e' || c == 'E') && pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            } else {
                break;
            }
        }
        if (!digits) fail("malformed number at offset " + std::to_string(start));
        std::string_view tok = s_.substr(start, pos_ - start);
        if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
        if (is_float) {
            double d = 0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
            if (ec != std::errc{} || p != tok.data() + tok.size() || !std::isfinite(d)) {
                fail("malformed number at offset " + std::to_string(start));
            }
            return Value(d);
        }
        std::int64_t i = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), i);
        if (ec != std::errc{} || p != tok.data() + tok.size()) {
            fail("integer out of range at offset " + std::to_string(start));
        }
        return Value(i);
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

inline void append_quoted(std::string& out, std::string_view s) {
    out.push_back('"');
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            case '\0': out += "\\0"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
}

inline void append_value(std::string& out, const Value& v);

inline void append_items(std::string& out, const std::vector<Value>& items) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        append_value(out, items[i]);
    }
}

inline void append_value(std::string& out, const Value& v) {
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::string>) {
                append_quoted(out, x);
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                out += std::to_string(x);
            } else if constexpr (std::is_same_v<T, double>) {
                char buf[64];
                auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
                std::string_view s(buf, static_cast<std::size_t>(p - buf));
                out += s;
                if (s.find_first_of(".eEn") == std::string_view::npos) out += ".0";
            } else if constexpr (std::is_same_v<T, bool>) {
                out += x ? "true" : "false";
            } else if constexpr (std::is_same_v<T, ListValue>) {
                out.push_back('[');
                append_items(out, x.items);
                out.push_back(']');
            } else if constexpr (std::is_same_v<T, TupleValue>) {
                out.push_back('(');
                append_items(out, x.items);
                if (x.items.size() == 1) out.push_back(',');
                out.push_back(')');
            } else if constexpr (std::is_same_v<T, DictValue>) {
                out.push_back('{');
                for (std::size_t i = 0; i < x.entries.size(); ++i) {
                    if (i) out += ", ";
                    append_quoted(out, x.entries[i].first);
                    out += ": ";
                    append_value(out, x.entries[i].second);
                }
                out.push_back('}');
            }
        },
        v.data);
}

/// Marker-free spans between an open marker and the next close marker. A
/// repeated open marker restarts the span.
inline std::vector<std::pair<std::size_t, std::size_t>> marker_spans(std::string_view text) {
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t from = 0;
    for (;;) {
        auto open = text.find(kOpenMarker, from);
        if (open == std::string_view::npos) break;
        auto close = text.find(kCloseMarker, open + kOpenMarker.size());
        if (close == std::string_view::npos) break;
        open = text.rfind(kOpenMarker, close - kOpenMarker.size());
        spans.emplace_back(open + kOpenMarker.size(), close);
        from = close + kCloseMarker.size();
    }
    return spans;
}

inline bool contains_marker(std::string_view s) {
    return s.find(kOpenMarker) != std::string_view::npos ||
           s.find(kCloseMarker) != std::string_view::npos;
}

/// First `identifier(...)` with balanced parentheses and no marker tokens.
inline std::optional<std::string> scan_call(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '(' || i == 0 || !is_ident_char(text[i - 1])) continue;
        std::size_t start = i;
        while (start > 0 && is_ident_char(text[start - 1])) --start;
        while (start < i && !is_ident_start(text[start])) ++start;
        if (start == i) continue;
        auto end = match_paren(text, i);
        if (end == std::string_view::npos) continue;
        auto candidate = text.substr(start, end - start);
        if (contains_marker(candidate)) continue;
        return std::string(candidate);
    }
    return std::nullopt;
}

} // namespace detail

/// Every `<<API>> ... <</API>>` block in order, trimmed.
inline std::vector<std::string> extract_request_blocks(std::string_view llm_output) {
    std::vector<std::string> out;
    for (auto [b, e] : detail::marker_spans(llm_output)) {
        out.emplace_back(detail::trim(llm_output.substr(b, e - b)));
    }
    return out;
}

/// Text between the first `<</API>>` and the closest `<<API>>` before it;
/// without a marker pair, the first balanced `identifier(...)` in the output.
inline std::optional<std::string> extract_request_block(std::string_view llm_output) {
    auto spans = detail::marker_spans(llm_output);
    if (!spans.empty()) {
        auto [b, e] = spans.front();
        return std::string(detail::trim(llm_output.substr(b, e - b)));
    }
    return detail::scan_call(llm_output);
}

/// Parses one request block. Total: never throws.
inline ParseOutcome parse_request(std::string_view block) {
    try {
        return detail::RequestParser(block).parse();
    } catch (const detail::SyntaxError& e) {
        return Unparseable{e.reason, std::string(block), e.message};
    }
}

/// Extracts the request block from raw LLM output and parses it. The
/// Unparseable branch carries the full output.
inline ParseOutcome parse_llm_output(std::string_view llm_output) {
    auto block = extract_request_block(llm_output);
    if (!block) {
        return Unparseable{ParseFailure::NoBlock, std::string(llm_output), "no API request found"};
    }
    auto outcome = parse_request(*block);
    if (outcome.parsed()) return outcome;
    auto failure = outcome.failure();
    failure.raw_text = std::string(llm_output);
    return failure;
}

inline std::string serialize_value(const Value& v) {
    std::string out;
    detail::append_value(out, v);
    return out;
}

/// Canonical form: `name(k1=v1, k2=v2)` with double-quoted strings.
inline std::string serialize_request(const ApiRequest& req) {
    std::string out = req.name;
    out.push_back('(');
    for (std::size_t i = 0; i < req.args.size(); ++i) {
        if (i) out += ", ";
        out += req.args[i].key;
        out.push_back('=');
        detail::append_value(out, req.args[i].value);
    }
    out.push_back(')');
    return out;
}

inline ValueType infer_value_type(const Value& v) {
    return std::visit(
        [](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::string>) return ValueType::String;
            else if constexpr (std::is_same_v<T, std::int64_t>) return ValueType::Int;
            else if constexpr (std::is_same_v<T, double>) return ValueType::Float;
            else if constexpr (std::is_same_v<T, ListValue>) return ValueType::List;
            else if constexpr (std::is_same_v<T, TupleValue>) return ValueType::Tuple;
            else if constexpr (std::is_same_v<T, DictValue>) return ValueType::Dict;
            else return ValueType::Bool;
        },
        v.data);
}

struct TypeRules {
    bool int_widens_to_float = true;
    bool tuple_as_list = false;
};

/// Whether a value may be passed for a parameter declared as `declared`.
inline bool is_compatible(const Value& v, ValueType declared, const TypeRules& rules = {}) {
    ValueType actual = infer_value_type(v);
    if (actual == declared) return true;
    if (rules.int_widens_to_float && actual == ValueType::Int && declared == ValueType::Float) return true;
    if (rules.tuple_as_list) {
        auto is_seq = [](ValueType t) { return t == ValueType::List || t == ValueType::Tuple; };
        if (is_seq(actual) && is_seq(declared)) return true;
    }
    return false;
}

/// Equality used when comparing against a ground truth: ints equal floats of
/// the same value when widening is on, dicts compare as unordered maps.
inline bool values_equivalent(const Value& a, const Value& b, const TypeRules& rules = {}) {
    if (rules.int_widens_to_float) {
        if (a.is<std::int64_t>() && b.is<double>()) return static_cast<double>(a.as<std::int64_t>()) == b.as<double>();
        if (a.is<double>() && b.is<std::int64_t>()) return a.as<double>() == static_cast<double>(b.as<std::int64_t>());
    }
    if (a.data.index() != b.data.index()) {
        if (rules.tuple_as_list) {
            const std::vector<Value>* xa = a.is<ListValue>() ? &a.as<ListValue>().items
                                           : a.is<TupleValue>() ? &a.as<TupleValue>().items : nullptr;
            const std::vector<Value>* xb = b.is<ListValue>() ? &b.as<ListValue>().items
                                           : b.is<TupleValue>() ? &b.as<TupleValue>().items : nullptr;
            if (xa && xb) {
                if (xa->size() != xb->size()) return false;
                for (std::size_t i = 0; i < xa->size(); ++i) {
                    if (!values_equivalent((*xa)[i], (*xb)[i], rules)) return false;
                }
                return true;
            }
        }
        return false;
    }
    auto seq_eq = [&](const std::vector<Value>& x, const std::vector<Value>& y) {
        if (x.size() != y.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!values_equivalent(x[i], y[i], rules)) return false;
        }
        return true;
    };
    if (a.is<ListValue>()) return seq_eq(a.as<ListValue>().items, b.as<ListValue>().items);
    if (a.is<TupleValue>()) return seq_eq(a.as<TupleValue>().items, b.as<TupleValue>().items);
    if (a.is<DictValue>()) {
        const auto& x = a.as<DictValue>().entries;
        const auto& y = b.as<DictValue>().entries;
        if (x.size() != y.size()) return false;
        for (const auto& [k, v] : x) {
            bool found = false;
            for (const auto& [k2, v2] : y) {
                if (k == k2) {
                    if (!values_equivalent(v, v2, rules)) return false;
                    found = true;
                    break;
                }
            }
            if (!found) return false;
        }
        return true;
    }
    return a == b;
}

} // namespace autofeedback
