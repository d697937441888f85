#pragma once

#include "autofeedback/doc_model.hpp"
#include "autofeedback/dynamic_analyzer.hpp"
#include "autofeedback/error.hpp"
#include "autofeedback/feedback.hpp"
#include "autofeedback/gateways.hpp"
#include "autofeedback/judge.hpp"
#include "autofeedback/request_codec.hpp"
#include "autofeedback/retrieval.hpp"
#include "autofeedback/static_scanner.hpp"

#include <exception>
#include <optional>
#include <string>
#include <vector>

namespace autofeedback {

struct PipelineConfig {
    std::size_t k = 1;
    double threshold = 0.5;
    std::size_t max_static = 3;
    std::size_t max_dynamic = 2;
    double chunk_threshold = 0.3;
    bool int_widens_to_float = true;
    bool tuple_as_list = false;

    void validate() const {
        if (k == 0) throw Error("k must be at least 1");
        if (!(threshold > 0 && threshold < 1)) throw Error("threshold must lie in (0, 1)");
        if (!(chunk_threshold > 0 && chunk_threshold < 1)) throw Error("chunk threshold must lie in (0, 1)");
    }

    DetectOptions detect_options() const { return {k, threshold, type_rules()}; }
    TypeRules type_rules() const { return {int_widens_to_float, tuple_as_list}; }
};

struct StaticEvent {
    std::size_t iteration = 0;
    std::string llm_output;
    DetectionFinding finding;
    std::string feedback;  // empty when the finding is NONE
};

/// Everything that happened in one task, for replay and human review.
struct SessionLog {
    std::string task_id;
    std::vector<StaticEvent> static_events;
    std::vector<FeedbackRecord> dynamic_records;
    std::optional<ApiRequest> final_request;
    std::optional<ApiResponse> final_response;
    bool satisfied = false;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    std::size_t llm_calls = 0;
    std::optional<std::string> error;

    std::size_t total_tokens() const noexcept { return prompt_tokens + completion_tokens; }
};

struct TaskResult {
    bool satisfied = false;
    std::optional<ApiRequest> request;
    std::optional<ApiResponse> response;
    SessionLog log;
    std::size_t total_llm_calls = 0;
    std::vector<ApiRequest> executed;  // every request sent to the executor, in order
};

/// A gateway failed mid-task. Carries the partial result collected so far and
/// the original exception.
class TaskAborted : public Error {
public:
    TaskAborted(TaskResult partial, std::exception_ptr cause, const std::string& what)
        : Error(what), partial_(std::move(partial)), cause_(std::move(cause)) {}

    const TaskResult& partial() const noexcept { return partial_; }
    std::exception_ptr cause() const noexcept { return cause_; }

private:
    TaskResult partial_;
    std::exception_ptr cause_;
};

/// Documentation rendered for the prompt, one block per API in doc order.
inline std::string render_doc_prompt(const ApiDocument& doc) {
    std::string out;
    for (const auto& api : doc.apis) {
        if (!out.empty()) out += '\n';
        out += "API: " + api.name + "\n";
        out += "Description: " + api.description + "\n";
        if (!api.params.empty()) {
            out += "Parameters:\n";
            for (const auto& p : api.params) {
                out += "- " + p.name + " (" + std::string(to_string(p.value_type)) + ", " +
                       (p.required ? "required" : "optional") + "): " + p.description + "\n";
            }
        }
        if (!api.exceptions.empty()) {
            out += "Exceptions:\n";
            for (const auto& e : api.exceptions) out += e.code + ": " + e.message + "\n";
        }
    }
    return out;
}

inline constexpr std::string_view kSystemPreamble =
    "You are an assistant that fulfils user instructions by calling APIs. Use only the APIs in the "
    "documentation and write exactly one API request in the format "
    "APINAME(key1=value1, key2=value2, ...) between <<API>> and <</API>>.";

inline std::vector<ChatMessage> initial_messages(std::string_view instruction, const ApiDocument& doc) {
    return {{Role::System, std::string(kSystemPreamble)},
            {Role::User, "API documentation:\n" + render_doc_prompt(doc) + "\nUser instruction: " +
                             std::string(instruction) +
                             "\n\nGenerate the API request between <<API>> and <</API>>."}};
}

/// Documentation plus the indexes derived from it. Immutable; share freely.
struct KnowledgeBase {
    const ApiDocument& doc;
    const SimilarityModel& model;
    const ChunkIndex& index;
};

/// Full pipeline for one instruction: static feedback loop, then dynamic
/// feedback loop on the first statically clean request. A request that
/// is still faulty when the static budget runs out is never executed.
inline TaskResult run_task(std::string_view instruction, const KnowledgeBase& kb, LlmClient& llm,
                           ApiExecutor& executor, RequirementJudge& judge, const PipelineConfig& config,
                           std::string task_id = "task") {
    config.validate();
    if (kb.doc.empty()) throw EmptyDocument();

    TaskResult result;
    SessionLog& log = result.log;
    log.task_id = std::move(task_id);
    auto count = [&](const LlmReply& r) {
        log.prompt_tokens += r.prompt_tokens;
        log.completion_tokens += r.completion_tokens;
        ++log.llm_calls;
    };
    const auto opts = config.detect_options();

    try {
        auto messages = initial_messages(instruction, kb.doc);
        std::optional<ApiRequest> clean;
        for (std::size_t s = 0;; ++s) {
            auto reply = llm.complete(messages);
            count(reply);
            auto outcome = parse_llm_output(reply.text);
            StaticEvent ev{s, reply.text, detect(outcome, instruction, kb.doc, kb.model, opts), {}};
            if (ev.finding.error_type == ErrorType::NONE) {
                log.static_events.push_back(std::move(ev));
                messages.push_back({Role::Assistant, reply.text});
                clean = outcome.request();
                break;
            }
            ev.feedback = render_feedback(ev.finding).text;
            log.static_events.push_back(ev);
            if (s >= config.max_static) break;
            messages.push_back({Role::Assistant, reply.text});
            messages.push_back({Role::User, ev.feedback});
        }

        if (clean) {
            DynamicContext ctx;
            ctx.preamble = messages;
            ctx.screen = [&](const ApiRequest& candidate) -> std::optional<std::string> {
                auto f = detect(candidate, instruction, kb.doc, kb.model, opts);
                if (f.error_type == ErrorType::NONE) return std::nullopt;
                return std::string(to_string(f.error_type));
            };
            ctx.on_record = [&](const FeedbackRecord& r) { log.dynamic_records.push_back(r); };
            ctx.on_reply = count;
            result.executed.push_back(*clean);
            auto dyn = run_dynamic_loop(*clean, kb.index, executor, llm, judge, kb.model, config.max_dynamic, ctx);
            result.executed = std::move(dyn.executed);
            log.final_request = dyn.final_request;
            log.final_response = dyn.final_response;
            log.satisfied = dyn.satisfied;
        }
    } catch (const std::exception& e) {
        log.error = e.what();
        result.total_llm_calls = log.llm_calls;
        result.request = log.final_request;
        result.response = log.final_response;
        throw TaskAborted(result, std::current_exception(), e.what());
    }

    result.satisfied = log.satisfied;
    result.request = log.final_request;
    result.response = log.final_response;
    result.total_llm_calls = log.llm_calls;
    return result;
}

} // namespace autofeedback
