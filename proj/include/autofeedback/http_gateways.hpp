#pragma once

// HTTP-backed gateways. Define CPPHTTPLIB_OPENSSL_SUPPORT (and link OpenSSL)
// before including this header to enable https:// endpoints.

#include "autofeedback/error.hpp"
#include "autofeedback/gateways.hpp"
#include "autofeedback/request_codec.hpp"
#include "autofeedback/similarity.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>

namespace autofeedback {

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
};

/// `scheme://host[:port]` plus an optional path prefix without trailing slash.
struct Endpoint {
    std::string origin;
    std::string prefix;

    static Endpoint parse(const std::string& base_url) {
        auto scheme_end = base_url.find("://");
        if (scheme_end == std::string::npos) throw Error("base URL needs a scheme: '" + base_url + "'");
        const auto scheme = base_url.substr(0, scheme_end);
        if (scheme != "http" && scheme != "https") throw Error("unsupported URL scheme '" + scheme + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
        if (scheme == "https") throw Error("https endpoints need a build with OpenSSL support");
#endif
        auto path_start = base_url.find('/', scheme_end + 3);
        Endpoint e;
        e.origin = base_url.substr(0, path_start);
        if (path_start != std::string::npos) e.prefix = base_url.substr(path_start);
        while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
        return e;
    }
};

namespace detail {

inline bool transient_status(int status) { return status == 429 || status >= 500; }

/// Runs `send` until it yields a non-transient response or attempts run out.
template <class Send>
httplib::Result with_retries(const RetryPolicy& policy, const std::string& what, Send&& send,
                             bool retry_server_errors) {
    std::string last_error;
    auto backoff = policy.initial_backoff;
    for (int attempt = 0; attempt < std::max(1, policy.attempts); ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto res = send();
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (retry_server_errors && transient_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        return res;
    }
    throw TransportError(what + " failed after " + std::to_string(policy.attempts) +
                         " attempts: " + last_error);
}

inline nlohmann::json value_to_json(const Value& v) {
    return std::visit(
        [](const auto& x) -> nlohmann::json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, ListValue> || std::is_same_v<T, TupleValue>) {
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& item : x.items) arr.push_back(value_to_json(item));
                return arr;
            } else if constexpr (std::is_same_v<T, DictValue>) {
                nlohmann::json obj = nlohmann::json::object();
                for (const auto& [k, item] : x.entries) obj[k] = value_to_json(item);
                return obj;
            } else {
                return x;
            }
        },
        v.data);
}

/// Plain text for strings, canonical literal for everything else.
inline std::string value_to_param(const Value& v) {
    return v.is<std::string>() ? v.as<std::string>() : serialize_value(v);
}

} // namespace detail

/// OpenAI-compatible chat-completions client.
class HttpLlmClient final : public LlmClient {
public:
    HttpLlmClient(const std::string& base_url, std::string model, std::string api_key, RetryPolicy retry = {})
        : endpoint_(Endpoint::parse(base_url)), model_(std::move(model)), api_key_(std::move(api_key)),
          retry_(retry) {}

    LlmReply complete(std::span<const ChatMessage> messages) override {
        nlohmann::json msgs = nlohmann::json::array();
        for (const auto& m : messages) msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
        const std::string body = nlohmann::json{{"model", model_}, {"messages", std::move(msgs)}}.dump();

        httplib::Client cli(endpoint_.origin);
        cli.set_connection_timeout(std::chrono::seconds(10));
        cli.set_read_timeout(std::chrono::seconds(300));
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        const auto path = endpoint_.prefix + "/chat/completions";
        auto res = detail::with_retries(
            retry_, "chat completion request",
            [&] { return cli.Post(path, headers, body, "application/json"); }, true);
        if (res->status != 200) {
            throw ProtocolError("chat completion returned HTTP " + std::to_string(res->status) + ": " + res->body);
        }

        nlohmann::json j;
        try {
            j = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw ProtocolError(std::string("chat completion body is not JSON: ") + e.what());
        }
        const auto* content = find_content(j);
        if (!content) throw ProtocolError("chat completion body lacks choices[0].message.content");

        LlmReply reply;
        reply.text = content->get<std::string>();
        const auto usage = j.find("usage");
        if (usage != j.end() && usage->is_object() && usage->contains("prompt_tokens") &&
            usage->contains("completion_tokens")) {
            reply.prompt_tokens = (*usage)["prompt_tokens"].get<std::size_t>();
            reply.completion_tokens = (*usage)["completion_tokens"].get<std::size_t>();
        } else {
            reply.prompt_tokens = whitespace_token_count(messages);
            reply.completion_tokens = whitespace_token_count(reply.text);
        }
        return reply;
    }

private:
    static const nlohmann::json* find_content(const nlohmann::json& j) {
        if (!j.is_object()) return nullptr;
        auto choices = j.find("choices");
        if (choices == j.end() || !choices->is_array() || choices->empty()) return nullptr;
        const auto& first = (*choices)[0];
        if (!first.is_object()) return nullptr;
        auto msg = first.find("message");
        if (msg == first.end() || !msg->is_object()) return nullptr;
        auto content = msg->find("content");
        if (content == msg->end() || !content->is_string()) return nullptr;
        return &*content;
    }

    Endpoint endpoint_;
    std::string model_;
    std::string api_key_;
    RetryPolicy retry_;
};

struct HttpRoute {
    std::string method = "GET";  // GET or POST
    std::string path;            // may contain {param} placeholders
};

/// Sends requests to a real API server. Arguments fill `{param}` path
/// placeholders first; the rest become query parameters (GET) or a JSON body
/// (POST). Only connection failures are retried; every HTTP status is
/// returned to the caller verbatim.
class HttpApiExecutor final : public ApiExecutor {
public:
    HttpApiExecutor(const std::string& base_url, std::map<std::string, HttpRoute> routes, RetryPolicy retry = {})
        : endpoint_(Endpoint::parse(base_url)), routes_(std::move(routes)), retry_(retry) {}

    ApiResponse execute(const ApiRequest& req) override {
        auto it = routes_.find(req.name);
        if (it == routes_.end()) return {kStatusNotFound, "unknown api"};
        const auto& route = it->second;

        std::string path = endpoint_.prefix + route.path;
        std::vector<const Argument*> rest;
        for (const auto& a : req.args) {
            const std::string placeholder = "{" + a.key + "}";
            auto pos = path.find(placeholder);
            if (pos == std::string::npos) {
                rest.push_back(&a);
                continue;
            }
            path.replace(pos, placeholder.size(), httplib::detail::encode_url(detail::value_to_param(a.value)));
        }

        httplib::Client cli(endpoint_.origin);
        cli.set_connection_timeout(std::chrono::seconds(10));
        cli.set_read_timeout(std::chrono::seconds(60));
        httplib::Result res;
        if (route.method == "POST") {
            nlohmann::json body = nlohmann::json::object();
            for (const auto* a : rest) body[a->key] = detail::value_to_json(a->value);
            const auto text = body.dump();
            res = detail::with_retries(
                retry_, "API request " + req.name, [&] { return cli.Post(path, text, "application/json"); }, false);
        } else {
            httplib::Params params;
            for (const auto* a : rest) params.emplace(a->key, detail::value_to_param(a->value));
            res = detail::with_retries(
                retry_, "API request " + req.name,
                [&] { return cli.Get(path, params, httplib::Headers{}); }, false);
        }
        return {res->status, res->body};
    }

    /// Reads `{"api": {"method": "GET", "path": "/x/{id}"}}`.
    static std::map<std::string, HttpRoute> routes_from_json(const nlohmann::json& j) {
        std::map<std::string, HttpRoute> routes;
        if (!j.is_object()) throw Error("route map must be a JSON object");
        for (const auto& [name, r] : j.items()) {
            HttpRoute route;
            route.method = r.value("method", std::string("GET"));
            route.path = r.at("path").get<std::string>();
            if (route.method != "GET" && route.method != "POST") {
                throw Error("route '" + name + "' has unsupported method " + route.method);
            }
            routes.emplace(name, std::move(route));
        }
        return routes;
    }

private:
    Endpoint endpoint_;
    std::map<std::string, HttpRoute> routes_;
    RetryPolicy retry_;
};

/// Embeddings fetched from an OpenAI-compatible `/embeddings` endpoint.
class RemoteEmbeddingModel final : public SimilarityModel {
public:
    RemoteEmbeddingModel(const std::string& base_url, std::string model, std::string api_key, RetryPolicy retry = {})
        : endpoint_(Endpoint::parse(base_url)), model_(std::move(model)), api_key_(std::move(api_key)),
          retry_(retry) {}

    double score(std::string_view a, std::string_view b) const override {
        return std::clamp(cosine(embed(a), embed(b)), 0.0, 1.0);
    }

    std::vector<double> embed(std::string_view text) const override {
        const auto body = nlohmann::json{{"input", {std::string(text)}}, {"model", model_}}.dump();
        httplib::Client cli(endpoint_.origin);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        const auto path = endpoint_.prefix + "/embeddings";
        auto res = detail::with_retries(
            retry_, "embedding request", [&] { return cli.Post(path, headers, body, "application/json"); }, true);
        if (res->status != 200) throw ProtocolError("embedding endpoint returned HTTP " + std::to_string(res->status));
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at("data").at(0).at("embedding").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("malformed embedding response: ") + e.what());
        }
    }

private:
    Endpoint endpoint_;
    std::string model_;
    std::string api_key_;
    RetryPolicy retry_;
};

} // namespace autofeedback
