#include "autofeedback/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

using namespace autofeedback;

namespace {

struct R {
    bool satisfied;
};

} // namespace

TEST(Metrics, AccuracyCountsSatisfied) {
    std::vector<R> rs(10, R{false});
    for (int i = 0; i < 7; ++i) rs[static_cast<std::size_t>(i)].satisfied = true;
    EXPECT_DOUBLE_EQ(accuracy(rs), 70.0);
    EXPECT_DOUBLE_EQ(accuracy(std::vector<R>(3, R{true})), 100.0);
    EXPECT_DOUBLE_EQ(accuracy(std::vector<R>(3, R{false})), 0.0);
    EXPECT_THROW(accuracy(std::vector<R>{}), EmptyInput);
}

TEST(Metrics, OverheadIsTokensPerAccuracyPoint) {
    EXPECT_DOUBLE_EQ(overhead(1000.0, 50.0), 20.0);
    EXPECT_THROW(overhead(1000.0, 0.0), ZeroAccuracy);
}

TEST(Metrics, ProcessCorrectnessUsesCanonicalForm) {
    auto r = [](std::string_view s) { return parse_request(s).request(); };
    std::vector<ProcessSample> s{
        {"a", {r("f(x=1)")}, std::vector<ApiRequest>{r("f(x=1)")}},
        {"b", {r("f(x=2)"), r("f(x=1)")}, std::vector<ApiRequest>{r("f(x=1)")}},
        {"c", {r("f(x=1.0)")}, std::vector<ApiRequest>{r("f(x=1)")}},
        {"d", {r("f( x = 1 )")}, std::vector<ApiRequest>{r("f(x=1)")}},
    };
    EXPECT_DOUBLE_EQ(process_correctness(s), 50.0);
    s.push_back({"e", {}, std::nullopt});
    EXPECT_THROW(process_correctness(s), MissingGroundTruth);
    EXPECT_DOUBLE_EQ(process_correctness(s, ProcessMode::Judge, [](const ProcessSample& p) { return p.task_id == "e"; }), 20.0);
    EXPECT_THROW(process_correctness(std::span<const ProcessSample>{}), EmptyInput);
}

TEST(Metrics, ErrorDistributionAndPercentages) {
    std::vector<ErrorType> v{ErrorType::E1, ErrorType::E1, ErrorType::E2_3, ErrorType::NONE};
    auto h = error_distribution(v);
    EXPECT_EQ(h.at(ErrorType::E1), 2u);
    EXPECT_EQ(h.at(ErrorType::NONE), 1u);
    EXPECT_FALSE(h.contains(ErrorType::E4_1));
    auto p = error_percentages(h);
    EXPECT_NEAR(p.at(ErrorType::E1), 200.0 / 3.0, 1e-12);
    EXPECT_FALSE(p.contains(ErrorType::NONE));
    EXPECT_TRUE(error_percentages(error_distribution(std::vector<ErrorType>{ErrorType::NONE})).empty());
}

TEST(Metrics, SpearmanKnownValues) {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> up{2, 4, 6, 8, 10};
    std::vector<double> down{5, 4, 3, 2, 1};
    EXPECT_NEAR(spearman(x, up), 1.0, 1e-12);
    EXPECT_NEAR(spearman(x, down), -1.0, 1e-12);
    // ranks with ties: y ranks = 1.5 1.5 3 4 5
    std::vector<double> tied{1, 1, 2, 3, 4};
    EXPECT_NEAR(spearman(x, tied), 0.9746794344808963, 1e-12);
    EXPECT_DOUBLE_EQ(spearman(x, std::vector<double>(5, 7.0)), 0.0);
}

TEST(Metrics, SpearmanErrors) {
    std::vector<double> a{1, 2, 3}, b{1, 2};
    EXPECT_THROW(spearman(a, b), LengthMismatch);
    EXPECT_THROW(spearman(std::vector<double>{1}, std::vector<double>{2}), TooShort);
}

TEST(Metrics, SpearmanInvariantUnderMonotoneMaps) {
    std::mt19937 gen(41);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(8), y(8), fx(8), gy(8);
        for (std::size_t i = 0; i < 8; ++i) {
            x[i] = u(gen);
            y[i] = std::round(u(gen));
            fx[i] = std::exp(x[i] / 5.0) * 3 + 1;
            gy[i] = y[i] * y[i] * y[i] - 7;
        }
        const double base = spearman(x, y);
        EXPECT_NEAR(spearman(fx, gy), base, 1e-9);
        EXPECT_NEAR(spearman(y, x), base, 1e-12);
        EXPECT_GE(base, -1.0);
        EXPECT_LE(base, 1.0);
    }
}

TEST(Metrics, PopulationVariance) {
    EXPECT_DOUBLE_EQ(population_variance(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}), 4.0);
    EXPECT_DOUBLE_EQ(population_variance(std::vector<double>{3}), 0.0);
    EXPECT_THROW(population_variance(std::vector<double>{}), EmptyInput);
}

TEST(Metrics, ReportJsonOmitsUndefinedOverhead) {
    BenchmarkReport r;
    r.n_tasks = 2;
    r.accuracy_pct = 0;
    r.mean_tokens = 10;
    r.error_histogram[ErrorType::E1] = 2;
    auto j = r.to_json();
    EXPECT_TRUE(j["overhead"].is_null());
    EXPECT_EQ(j["error_histogram"]["E1"], 2);
    EXPECT_NE(r.to_text_table().find("E1"), std::string::npos);
}
