#include "autofeedback/feedback.hpp"
#include "support/corpus.hpp"
#include "support/fixtures.hpp"

#include <gtest/gtest.h>

#include <string>

using namespace autofeedback;

namespace {

DetectionFinding scan(std::string_view output, std::string_view instruction) {
    const auto& l = fixtures::loaded();
    return detect(parse_llm_output(output), instruction, l.doc, l.model);
}

bool contains(const std::string& hay, std::string_view needle) { return hay.find(needle) != std::string::npos; }

std::string last_line(const std::string& s) {
    auto p = s.rfind('\n');
    return p == std::string::npos ? s : s.substr(p + 1);
}

} // namespace

TEST(Feedback, E1SkipsExclude) {
    auto fb = render_feedback(scan("nothing useful", "Log in as alice."));
    EXPECT_FALSE(fb.parts_present.contains(FeedbackPart::Exclude));
    EXPECT_TRUE(fb.parts_present.contains(FeedbackPart::Declare));
    EXPECT_TRUE(fb.parts_present.contains(FeedbackPart::Locate));
    EXPECT_TRUE(fb.parts_present.contains(FeedbackPart::Suggest));
    EXPECT_TRUE(fb.parts_present.contains(FeedbackPart::Regenerate));
}

TEST(Feedback, E23NamesBothApis) {
    auto fb = render_feedback(scan("<<API>>find_aspirin_number()<</API>>", "I'm trying to find out how much aspirin is left."));
    EXPECT_TRUE(contains(fb.text, "find_aspirin_number"));
    EXPECT_TRUE(contains(fb.text, "list_medicines"));
    EXPECT_EQ(fb.parts_present.size(), 5u);
}

TEST(Feedback, E41QuotesValueAndDescription) {
    auto fb = render_feedback(scan(R"(<<API>>userLogin(days="three")<</API>>)", "Log in to my account as alice."));
    EXPECT_TRUE(contains(fb.text, "\"three\""));
    EXPECT_TRUE(contains(fb.text, "Number of days the session stays valid."));
}

TEST(Feedback, MissingParameterNamesIt) {
    auto fb = render_feedback(scan(R"(<<API>>userLogin(username="alice")<</API>>)", "Log in to my account as alice."));
    EXPECT_TRUE(contains(fb.text, "\"password\""));
    EXPECT_TRUE(contains(fb.text, "missing"));
}

TEST(Feedback, NoErrorRejected) {
    EXPECT_THROW(render_feedback(DetectionFinding{}), NoError);
}

TEST(Feedback, StartsWithDeclareEndsWithRegenerate) {
    const auto& l = fixtures::loaded();
    corpus::Generator gen(l.doc, 0.5);
    corpus::Rng rng(23);
    int rendered = 0;
    for (int i = 0; i < 300; ++i) {
        auto s = gen.random(rng);
        auto f = detect(parse_llm_output(s.output), s.instruction, l.doc, l.model);
        if (f.error_type == ErrorType::NONE) continue;
        auto fb = render_feedback(f);
        ++rendered;
        EXPECT_EQ(fb.text.rfind(kDeclareSentence, 0), 0u);
        EXPECT_EQ(last_line(fb.text), kRegenerateSentence);
        EXPECT_TRUE(fb.parts_present.contains(FeedbackPart::Regenerate));
        EXPECT_EQ(fb.parts_present.contains(FeedbackPart::Exclude), f.error_type != ErrorType::E1);
        if (f.offending_name && f.error_type != ErrorType::E4_1 && f.error_type != ErrorType::E4_OTHER) {
            EXPECT_TRUE(contains(fb.text, "\"" + *f.offending_name + "\"")) << fb.text;
        }
        if (f.suggested_name) {
            EXPECT_TRUE(contains(fb.text, "\"" + *f.suggested_name + "\"")) << fb.text;
        }
    }
    EXPECT_GT(rendered, 100);
}
