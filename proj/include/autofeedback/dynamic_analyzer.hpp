#pragma once

#include "autofeedback/gateways.hpp"
#include "autofeedback/judge.hpp"
#include "autofeedback/request_codec.hpp"
#include "autofeedback/retrieval.hpp"
#include "autofeedback/similarity.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace autofeedback {

struct Observation {
    ApiResponse response;
    std::optional<RetrievedMessage> error_message;
};

/// One dynamic feedback round: the request that was executed, what came
/// back, the model's reasoning, and the request adopted for the next round.
struct FeedbackRecord {
    std::size_t iteration = 0;
    ApiRequest action;
    Observation observation;
    std::string thought;
    ApiRequest new_action;
    std::string note;  // why the proposed request was not adopted, if it was not
};

struct DynamicOutcome {
    ApiResponse final_response;
    ApiRequest final_request;
    std::vector<FeedbackRecord> records;
    bool satisfied = false;
    std::vector<ApiRequest> executed;
    std::size_t llm_calls = 0;
};

/// Optional hooks for a dynamic run.
struct DynamicContext {
    /// Messages placed before the ReAct prompt on every LLM call.
    std::vector<ChatMessage> preamble;
    /// Returns an error description when a proposed request must be rejected
    /// before execution; nullopt accepts it.
    std::function<std::optional<std::string>(const ApiRequest&)> screen;
    std::function<void(const FeedbackRecord&)> on_record;
    std::function<void(const LlmReply&)> on_reply;
};

inline constexpr std::string_view kReaskMessage =
    "Your reply did not contain a parseable API request. Answer with 'Thought:' followed by one "
    "corrected request of the form APINAME(key1=value1, key2=value2, ...) between <<API>> and <</API>>.";

/// ReAct prompt over the full record history plus the current round.
inline std::string assemble_react_prompt(const std::vector<FeedbackRecord>& history, const ApiRequest& action,
                                         const Observation& observation) {
    auto observe = [](std::string& out, const Observation& o) {
        out += "Observation: status=" + std::to_string(o.response.status) + " body=" + o.response.body +
               " error_message=" + (o.error_message ? o.error_message->text : std::string("none")) + "\n";
    };
    std::string out =
        "The API request was executed but the result does not meet the user's requirement. "
        "Previous attempts and their results follow.\n";
    for (const auto& r : history) {
        out += "Action: " + serialize_request(r.action) + "\n";
        observe(out, r.observation);
        out += "Thought: " + r.thought + "\n";
    }
    out += "Action: " + serialize_request(action) + "\n";
    observe(out, observation);
    out += "Reason about the cause of the failure first, writing 'Thought:' followed by your reasoning. "
           "Then give the corrected API request between <<API>> and <</API>>.";
    return out;
}

/// Text after the first "Thought:" up to the request block, trimmed.
inline std::string extract_thought(std::string_view reply) {
    auto pos = reply.find("Thought:");
    std::string_view rest = pos == std::string_view::npos ? reply : reply.substr(pos + 8);
    for (auto stop : {kOpenMarker, std::string_view("Action:")}) {
        auto p = rest.find(stop);
        if (p != std::string_view::npos) rest = rest.substr(0, p);
    }
    return std::string(detail::trim(rest));
}

/// Executes `request` and, while the judge rejects the response and fewer
/// than `n_max` rounds were spent, retrieves the matching error message,
/// asks the LLM for a corrected request and executes it.
inline DynamicOutcome run_dynamic_loop(ApiRequest request, const ChunkIndex& index, ApiExecutor& executor,
                                       LlmClient& llm, RequirementJudge& judge, const SimilarityModel& model,
                                       std::size_t n_max, const DynamicContext& ctx = {}) {
    DynamicOutcome out;
    auto call_llm = [&](const std::vector<ChatMessage>& msgs) {
        auto reply = llm.complete(msgs);
        ++out.llm_calls;
        if (ctx.on_reply) ctx.on_reply(reply);
        return reply;
    };

    out.executed.push_back(request);
    ApiResponse response = executor.execute(request);
    bool accepted = judge.accepts(request, response);

    for (std::size_t i = 0; !accepted && i < n_max; ++i) {
        Observation obs{response, retrieve_error_message(request.name, serialize_request(request) + " " + response.body,
                                                         index, model)};
        std::vector<ChatMessage> msgs = ctx.preamble;
        msgs.push_back({Role::User, assemble_react_prompt(out.records, request, obs)});

        auto reply = call_llm(msgs);
        auto parsed = parse_llm_output(reply.text);
        std::string thought = extract_thought(reply.text);
        if (!parsed.parsed()) {
            msgs.push_back({Role::Assistant, reply.text});
            msgs.push_back({Role::User, std::string(kReaskMessage)});
            auto retry = call_llm(msgs);
            parsed = parse_llm_output(retry.text);
            if (auto t = extract_thought(retry.text); !t.empty()) thought = std::move(t);
        }

        FeedbackRecord rec;
        rec.iteration = i;
        rec.action = request;
        rec.observation = std::move(obs);
        rec.thought = std::move(thought);
        rec.new_action = request;
        if (!parsed.parsed()) {
            rec.note = "no parseable request after re-ask";
        } else if (auto err = ctx.screen ? ctx.screen(parsed.request()) : std::nullopt) {
            rec.note = "rejected by static scan: " + *err;
        } else {
            rec.new_action = parsed.request();
        }
        const bool changed = !(rec.new_action == request);
        if (ctx.on_record) ctx.on_record(rec);
        out.records.push_back(rec);

        if (changed) {
            request = rec.new_action;
            out.executed.push_back(request);
            response = executor.execute(request);
            accepted = judge.accepts(request, response);
        }
    }

    out.final_request = std::move(request);
    out.final_response = std::move(response);
    out.satisfied = accepted;
    return out;
}

} // namespace autofeedback
