#pragma once

#include "autofeedback/doc_model.hpp"
#include "autofeedback/request_codec.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace autofeedback {

enum class Role { System, User, Assistant };

inline std::string_view to_string(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct LlmReply {
    std::string text;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

/// Number of whitespace-separated tokens.
inline std::size_t whitespace_token_count(std::string_view text) {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : text) {
        bool space = detail::is_space(c);
        if (!space && !in_token) ++n;
        in_token = !space;
    }
    return n;
}

inline std::size_t whitespace_token_count(std::span<const ChatMessage> messages) {
    std::size_t n = 0;
    for (const auto& m : messages) n += whitespace_token_count(m.content);
    return n;
}

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual LlmReply complete(std::span<const ChatMessage> messages) = 0;
};

/// Replays a fixed list of replies; once exhausted the last reply repeats.
/// Token counts are whitespace-token counts. Stateful: one instance per session.
class ScriptedLlm final : public LlmClient {
public:
    explicit ScriptedLlm(std::vector<std::string> script) : script_(std::move(script)) {
        if (script_.empty()) throw Error("scripted LLM needs at least one reply");
    }

    LlmReply complete(std::span<const ChatMessage> messages) override {
        std::lock_guard lock(mu_);
        prompts_.emplace_back(messages.begin(), messages.end());
        const auto& text = script_[std::min(next_, script_.size() - 1)];
        ++next_;
        return {text, whitespace_token_count(messages), whitespace_token_count(text)};
    }

    /// Every message list received so far, in call order.
    std::vector<std::vector<ChatMessage>> prompts() const {
        std::lock_guard lock(mu_);
        return prompts_;
    }

    std::size_t calls() const {
        std::lock_guard lock(mu_);
        return prompts_.size();
    }

private:
    std::vector<std::string> script_;
    std::size_t next_ = 0;
    std::vector<std::vector<ChatMessage>> prompts_;
    mutable std::mutex mu_;
};

/// Raw API server answer. `body` is kept byte-exact.
struct ApiResponse {
    int status = 0;
    std::string body;

    friend bool operator==(const ApiResponse&, const ApiResponse&) = default;
};

inline constexpr int kStatusNotFound = 404;

class ApiExecutor {
public:
    virtual ~ApiExecutor() = default;
    virtual ApiResponse execute(const ApiRequest& req) = 0;
};

/// In-process API server dispatching on the request name.
class MockApiServer final : public ApiExecutor {
public:
    using Handler = std::function<ApiResponse(const ApiRequest&)>;

    MockApiServer() = default;
    explicit MockApiServer(std::map<std::string, Handler> routes) : routes_(std::move(routes)) {}

    void add_route(std::string name, Handler handler) { routes_[std::move(name)] = std::move(handler); }

    ApiResponse execute(const ApiRequest& req) override {
        {
            std::lock_guard lock(mu_);
            ++calls_;
            executed_.push_back(req);
        }
        auto it = routes_.find(req.name);
        if (it == routes_.end()) return {kStatusNotFound, "unknown api"};
        return it->second(req);
    }

    std::size_t calls() const {
        std::lock_guard lock(mu_);
        return calls_;
    }

    std::vector<ApiRequest> executed() const {
        std::lock_guard lock(mu_);
        return executed_;
    }

    /// Builds a server from a rule file:
    /// `{"api": [{"match": {"key": <literal text>}, "status": 200, "body": "..."}, ...]}`.
    /// Rules are tried in order; a rule without `match` always applies.
    /// `match` values are request literals (`"\"x\""`, `"5"`) compared by
    /// equivalence. Documented APIs without rules answer 200 `{"ok":true}`.
    static MockApiServer from_json(const nlohmann::json& rules, const ApiDocument* doc = nullptr) {
        MockApiServer server;
        if (doc) {
            for (const auto& api : doc->apis) {
                server.add_route(api.name, [](const ApiRequest&) { return ApiResponse{200, R"({"ok":true})"}; });
            }
        }
        if (rules.is_null()) return server;
        if (!rules.is_object()) throw Error("mock route file must be a JSON object");
        for (const auto& [name, list] : rules.items()) {
            if (!list.is_array()) throw Error("mock routes for '" + name + "' must be an array");
            std::vector<Rule> parsed;
            for (const auto& r : list) {
                Rule rule;
                rule.status = r.value("status", 200);
                rule.body = r.value("body", std::string{});
                if (auto m = r.find("match"); m != r.end()) {
                    for (const auto& [key, lit] : m->items()) {
                        auto probe = parse_request("f(v=" + lit.get<std::string>() + ")");
                        if (!probe.parsed()) throw Error("bad match literal for '" + name + "." + key + "'");
                        rule.match.emplace_back(key, probe.request().args.front().value);
                    }
                }
                parsed.push_back(std::move(rule));
            }
            server.add_route(name, [parsed = std::move(parsed)](const ApiRequest& req) {
                for (const auto& rule : parsed) {
                    bool ok = true;
                    for (const auto& [key, value] : rule.match) {
                        const auto* v = req.find_arg(key);
                        if (!v || !values_equivalent(*v, value)) {
                            ok = false;
                            break;
                        }
                    }
                    if (ok) return ApiResponse{rule.status, rule.body};
                }
                return ApiResponse{400, "no matching mock rule"};
            });
        }
        return server;
    }

    MockApiServer(MockApiServer&& other) noexcept
        : routes_(std::move(other.routes_)), calls_(other.calls_), executed_(std::move(other.executed_)) {}

private:
    struct Rule {
        std::vector<std::pair<std::string, Value>> match;
        int status = 200;
        std::string body;
    };

    std::map<std::string, Handler> routes_;
    std::size_t calls_ = 0;
    std::vector<ApiRequest> executed_;
    mutable std::mutex mu_;
};

} // namespace autofeedback
