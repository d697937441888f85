#pragma once

#include "autofeedback/gateways.hpp"
#include "autofeedback/request_codec.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace autofeedback {

/// Decides whether an API response satisfies the user's task.
class RequirementJudge {
public:
    virtual ~RequirementJudge() = default;
    virtual bool accepts(const ApiRequest& request, const ApiResponse& response) = 0;
};

/// Accepts when the status is a success status, the body contains none of the
/// failure markers, and, when a ground truth is set, the request is equivalent
/// to it.
class ExactMatchJudge final : public RequirementJudge {
public:
    ExactMatchJudge() = default;
    explicit ExactMatchJudge(std::optional<ApiRequest> truth, std::set<int> success = {200},
                             std::vector<std::string> failure_markers = {})
        : truth_(std::move(truth)), success_(std::move(success)), markers_(std::move(failure_markers)) {}

    bool accepts(const ApiRequest& request, const ApiResponse& response) override {
        if (!success_.contains(response.status)) return false;
        for (const auto& m : markers_) {
            if (response.body.find(m) != std::string::npos) return false;
        }
        if (!truth_) return true;
        if (request.name != truth_->name || request.args.size() != truth_->args.size()) return false;
        return std::all_of(truth_->args.begin(), truth_->args.end(), [&](const Argument& a) {
            const auto* v = request.find_arg(a.key);
            return v && values_equivalent(*v, a.value);
        });
    }

private:
    std::optional<ApiRequest> truth_;
    std::set<int> success_{200};
    std::vector<std::string> markers_;
};

/// Asks an LLM whether the response meets the instruction; accepts when the
/// reply starts with "yes".
class LlmJudge final : public RequirementJudge {
public:
    LlmJudge(LlmClient& llm, std::string instruction) : llm_(llm), instruction_(std::move(instruction)) {}

    bool accepts(const ApiRequest& request, const ApiResponse& response) override {
        std::vector<ChatMessage> msgs{
            {Role::System,
             "You evaluate whether an API request and its response meet a user's requirement. "
             "Answer with a single word: yes or no."},
            {Role::User, "User instruction: " + instruction_ + "\nAPI request: " + serialize_request(request) +
                             "\nAPI response (status " + std::to_string(response.status) + "): " + response.body +
                             "\nDoes the response meet the user's requirement?"}};
        auto reply = llm_.complete(msgs);
        std::string t;
        for (char c : reply.text) {
            if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            if (t.size() >= 3) break;
        }
        return t.rfind("yes", 0) == 0;
    }

private:
    LlmClient& llm_;
    std::string instruction_;
};

} // namespace autofeedback
