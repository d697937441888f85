#pragma once

#include "autofeedback/error.hpp"
#include "autofeedback/request_codec.hpp"
#include "autofeedback/static_scanner.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace autofeedback {

template <class R>
concept HasSatisfied = requires(const R& r) {
    { r.satisfied } -> std::convertible_to<bool>;
};

/// Percentage of results that met the user's requirement.
template <HasSatisfied R>
double accuracy(std::span<const R> results) {
    if (results.empty()) throw EmptyInput("accuracy");
    auto ok = std::count_if(results.begin(), results.end(), [](const R& r) { return static_cast<bool>(r.satisfied); });
    return 100.0 * static_cast<double>(ok) / static_cast<double>(results.size());
}

template <HasSatisfied R>
double accuracy(const std::vector<R>& results) {
    return accuracy(std::span<const R>(results));
}

/// Mean tokens per task divided by accuracy: cost of one accuracy point.
inline double overhead(double mean_tokens, double accuracy_pct) {
    if (!(accuracy_pct > 0)) throw ZeroAccuracy();
    return mean_tokens / accuracy_pct;
}

struct ProcessSample {
    std::string task_id;
    std::vector<ApiRequest> executed;
    std::optional<std::vector<ApiRequest>> truth;
};

enum class ProcessMode { Exact, Judge };

/// Share of tasks whose executed request sequence is optimal. In exact mode
/// that means equal, call by call in canonical form, to the ground truth.
inline double process_correctness(std::span<const ProcessSample> samples, ProcessMode mode = ProcessMode::Exact,
                                  const std::function<bool(const ProcessSample&)>& judge = {}) {
    if (samples.empty()) throw EmptyInput("process correctness");
    std::size_t ok = 0;
    for (const auto& s : samples) {
        bool counted = false;
        if (mode == ProcessMode::Judge) {
            if (!judge) throw Error("judge-mode process correctness needs a judge");
            counted = judge(s);
        } else {
            if (!s.truth) throw MissingGroundTruth(s.task_id);
            counted = s.executed.size() == s.truth->size() &&
                      std::equal(s.executed.begin(), s.executed.end(), s.truth->begin(),
                                 [](const ApiRequest& a, const ApiRequest& b) {
                                     return serialize_request(a) == serialize_request(b);
                                 });
        }
        if (counted) ++ok;
    }
    return 100.0 * static_cast<double>(ok) / static_cast<double>(samples.size());
}

using ErrorHistogram = std::map<ErrorType, std::size_t>;

/// Count per error type, NONE included; absent types have no key.
inline ErrorHistogram error_distribution(std::span<const ErrorType> classes) {
    ErrorHistogram h;
    for (auto t : classes) ++h[t];
    return h;
}

/// Percentages over the non-NONE entries; empty when there are none.
inline std::map<ErrorType, double> error_percentages(const ErrorHistogram& h) {
    std::size_t total = 0;
    for (const auto& [t, n] : h) {
        if (t != ErrorType::NONE) total += n;
    }
    std::map<ErrorType, double> out;
    if (total == 0) return out;
    for (const auto& [t, n] : h) {
        if (t != ErrorType::NONE) out[t] = 100.0 * static_cast<double>(n) / static_cast<double>(total);
    }
    return out;
}

namespace detail {

/// 1-based ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = r;
        i = j + 1;
    }
    return ranks;
}

} // namespace detail

/// Spearman rank correlation (Pearson over average ranks), clamped to [-1, 1].
/// Returns 0 when either side is constant.
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw LengthMismatch();
    if (xs.size() < 2) throw TooShort();
    auto rx = detail::average_ranks(xs);
    auto ry = detail::average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Divide-by-n variance.
inline double population_variance(std::span<const double> xs) {
    if (xs.empty()) throw EmptyInput("variance");
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return ss / n;
}

struct BenchmarkReport {
    std::size_t n_tasks = 0;
    double accuracy_pct = 0;
    std::optional<double> process_correctness_pct;
    double mean_tokens = 0;
    std::optional<double> overhead;  // absent when accuracy is zero
    ErrorHistogram error_histogram;

    nlohmann::json to_json() const {
        nlohmann::json hist = nlohmann::json::object();
        for (const auto& [t, n] : error_histogram) hist[std::string(to_string(t))] = n;
        nlohmann::json j{{"n_tasks", n_tasks},
                         {"accuracy_pct", round2(accuracy_pct)},
                         {"mean_tokens", round2(mean_tokens)},
                         {"error_histogram", std::move(hist)}};
        j["process_correctness_pct"] = process_correctness_pct ? nlohmann::json(round2(*process_correctness_pct)) : nlohmann::json();
        j["overhead"] = overhead ? nlohmann::json(round2(*overhead)) : nlohmann::json();
        return j;
    }

    /// Aligned columns: avg tokens, accuracy, overhead, then the histogram.
    std::string to_text_table() const {
        std::ostringstream os;
        os << std::fixed << std::setprecision(2);
        os << std::left << std::setw(8) << "Tasks" << std::setw(14) << "Avg. tokens" << std::setw(14)
           << "Accuracy (%)" << std::setw(12) << "Overhead" << "Process (%)\n";
        os << std::setw(8) << n_tasks << std::setw(14) << mean_tokens << std::setw(14) << accuracy_pct
           << std::setw(12);
        if (overhead) os << *overhead; else os << "-";
        if (process_correctness_pct) os << *process_correctness_pct; else os << "-";
        os << "\n\n" << std::setw(12) << "Error type" << "Count\n";
        for (const auto& [t, n] : error_histogram) os << std::setw(12) << to_string(t) << n << "\n";
        return os.str();
    }

private:
    static double round2(double x) { return std::round(x * 100.0) / 100.0; }
};

} // namespace autofeedback
