#include "autofeedback/judge.hpp"
#include "autofeedback/orchestrator.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <string>

using namespace autofeedback;

namespace {

constexpr const char* kLogin = "Log in to my account as alice with the password secret.";
constexpr const char* kGood = R"(<<API>>userLogin(username="alice", password="secret")<</API>>)";

TaskResult go(std::string_view instruction, LlmClient& llm, ApiExecutor& exec, PipelineConfig config = {}) {
    ExactMatchJudge judge(std::nullopt, {200}, {"info_code:20000"});
    return run_task(instruction, fixtures::loaded().kb(), llm, exec, judge, config, "t");
}

class Unreachable final : public ApiExecutor {
public:
    ApiResponse execute(const ApiRequest&) override { throw TransportError("connection refused"); }
};

} // namespace

TEST(Pipeline, HappyPathOneCall) {
    ScriptedLlm llm({kGood});
    auto exec = fixtures::route_server();
    auto r = go(kLogin, llm, exec);
    EXPECT_TRUE(r.satisfied);
    EXPECT_EQ(r.total_llm_calls, 1u);
    EXPECT_EQ(r.log.llm_calls, 1u);
    ASSERT_EQ(r.log.static_events.size(), 1u);
    EXPECT_EQ(r.log.static_events[0].finding.error_type, ErrorType::NONE);
    EXPECT_TRUE(r.log.static_events[0].feedback.empty());
    EXPECT_EQ(r.executed.size(), 1u);
    EXPECT_GT(r.log.total_tokens(), 0u);
}

TEST(Pipeline, StaticBudgetExhaustedNeverExecutes) {
    ScriptedLlm llm({"no idea"});
    auto exec = fixtures::route_server();
    PipelineConfig c;
    c.max_static = 3;
    auto r = go(kLogin, llm, exec, c);
    EXPECT_FALSE(r.satisfied);
    EXPECT_EQ(llm.calls(), 4u);
    EXPECT_EQ(exec.calls(), 0u);
    EXPECT_FALSE(r.request);
    EXPECT_TRUE(r.executed.empty());
    EXPECT_EQ(r.log.static_events.size(), 4u);
}

TEST(Pipeline, FeedbackReachesNextPrompt) {
    ScriptedLlm llm({R"(<<API>>user_login(username="alice", password="secret")<</API>>)", kGood});
    auto exec = fixtures::route_server();
    auto r = go(kLogin, llm, exec);
    EXPECT_TRUE(r.satisfied);
    ASSERT_EQ(r.log.static_events.size(), 2u);
    EXPECT_EQ(r.log.static_events[0].finding.error_type, ErrorType::E2_2);
    auto prompts = llm.prompts();
    ASSERT_EQ(prompts.size(), 2u);
    EXPECT_EQ(prompts[1].back().content, r.log.static_events[0].feedback);
    EXPECT_EQ(prompts[1][prompts[1].size() - 2].role, Role::Assistant);
}

TEST(Pipeline, StaticThenDynamic) {
    ScriptedLlm llm({R"(<<API>>route_planning(origin="39.99,116.48", destination="39.91,116.40")<</API>>)",
                     R"(Thought: swap. <<API>>route_planning(origin="116.48,39.99", destination="116.40,39.91")<</API>>)"});
    auto exec = fixtures::route_server();
    auto r = go("Plan a driving path from 116.48,39.99 to 116.40,39.91 on the map.", llm, exec);
    EXPECT_TRUE(r.satisfied);
    EXPECT_EQ(r.log.dynamic_records.size(), 1u);
    EXPECT_EQ(r.executed.size(), 2u);
    EXPECT_EQ(r.total_llm_calls, 2u);
}

TEST(Pipeline, TransportFailureAbortsWithPartialLog) {
    ScriptedLlm llm({kGood});
    Unreachable exec;
    try {
        go(kLogin, llm, exec);
        FAIL() << "expected TaskAborted";
    } catch (const TaskAborted& e) {
        EXPECT_EQ(e.partial().log.static_events.size(), 1u);
        EXPECT_TRUE(e.partial().log.error);
        EXPECT_THROW(std::rethrow_exception(e.cause()), TransportError);
    }
}

TEST(Pipeline, InvalidConfigRejected) {
    ScriptedLlm llm({kGood});
    auto exec = fixtures::route_server();
    PipelineConfig c;
    c.threshold = 1.5;
    EXPECT_THROW(go(kLogin, llm, exec, c), Error);
    c = {};
    c.k = 0;
    EXPECT_THROW(go(kLogin, llm, exec, c), Error);
}

TEST(DocPrompt, ListsExceptionsPerApi) {
    auto text = render_doc_prompt(fixtures::doc());
    EXPECT_NE(text.find("20000: Longitude precedes latitude."), std::string::npos);
    EXPECT_NE(text.find("API: userLogin\n"), std::string::npos);
    EXPECT_NE(text.find("- days (int, optional): Number of days the session stays valid."), std::string::npos);
    EXPECT_LT(text.find("API: userLogin"), text.find("API: list_medicines"));
}

TEST(DocPrompt, InitialMessagesCarryInstruction) {
    auto msgs = initial_messages("do the thing", fixtures::doc());
    ASSERT_EQ(msgs.size(), 2u);
    EXPECT_EQ(msgs[0].role, Role::System);
    EXPECT_NE(msgs[1].content.find("User instruction: do the thing"), std::string::npos);
}
