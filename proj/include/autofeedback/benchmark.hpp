#pragma once

#include "autofeedback/doc_model.hpp"
#include "autofeedback/error.hpp"
#include "autofeedback/metrics.hpp"
#include "autofeedback/orchestrator.hpp"
#include "autofeedback/retrieval.hpp"
#include "autofeedback/session_log.hpp"
#include "autofeedback/similarity.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace autofeedback {

/// One dataset line.
struct Task {
    std::string id;
    std::string instruction;
    std::optional<std::vector<ApiRequest>> ground_truth;  // null in the dataset -> nullopt
    std::filesystem::path doc_path;
    std::optional<std::string> recorded_output;  // optional "output" field: a pre-recorded LLM reply
};

/// Parses dataset JSONL. Relative `doc` paths resolve against `base_dir`.
/// Blank lines are skipped; every other malformed line raises DatasetError
/// with its 1-based line number.
inline std::vector<Task> parse_dataset(std::string_view text, const std::filesystem::path& base_dir = {}) {
    std::vector<Task> tasks;
    std::istringstream in{std::string(text)};
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (detail::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DatasetError(n, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw DatasetError(n, "expected a JSON object");
        auto str_field = [&](const char* key) {
            auto it = j.find(key);
            if (it == j.end() || !it->is_string()) throw DatasetError(n, std::string("missing string field '") + key + "'");
            return it->get<std::string>();
        };
        Task t;
        t.id = str_field("id");
        t.instruction = str_field("instruction");
        std::filesystem::path doc = str_field("doc");
        t.doc_path = doc.is_absolute() || base_dir.empty() ? doc : base_dir / doc;

        auto parse_truth = [&](const nlohmann::json& v) {
            if (!v.is_string()) throw DatasetError(n, "ground_truth entries must be strings");
            auto outcome = parse_request(v.get<std::string>());
            if (!outcome.parsed()) {
                throw DatasetError(n, "ground_truth is not a valid request: " + outcome.failure().detail);
            }
            return outcome.request();
        };
        if (auto gt = j.find("ground_truth"); gt != j.end() && !gt->is_null()) {
            std::vector<ApiRequest> seq;
            if (gt->is_array()) {
                for (const auto& v : *gt) seq.push_back(parse_truth(v));
            } else {
                seq.push_back(parse_truth(*gt));
            }
            t.ground_truth = std::move(seq);
        }
        if (auto out = j.find("output"); out != j.end() && !out->is_null()) {
            if (!out->is_string()) throw DatasetError(n, "'output' must be a string");
            t.recorded_output = out->get<std::string>();
        }
        tasks.push_back(std::move(t));
    }
    return tasks;
}

inline std::vector<Task> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open dataset '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dataset(ss.str(), path.parent_path());
}

/// A document with its similarity model and chunk index.
struct LoadedDoc {
    ApiDocument doc;
    TfIdfModel model;
    ChunkIndex index;

    LoadedDoc(ApiDocument d, double chunk_threshold)
        : doc(std::move(d)), model(default_similarity(doc)), index(build_chunk_index(doc, model, chunk_threshold)) {}

    KnowledgeBase kb() const { return {doc, model, index}; }
};

/// Loads each documentation file once. Thread-safe.
class DocCache {
public:
    explicit DocCache(double chunk_threshold = 0.3) : chunk_threshold_(chunk_threshold) {}

    std::shared_ptr<const LoadedDoc> get(const std::filesystem::path& path) {
        std::lock_guard lock(mu_);
        auto key = path.lexically_normal().string();
        auto it = docs_.find(key);
        if (it != docs_.end()) return it->second;
        auto loaded = std::make_shared<const LoadedDoc>(load_document(path.string()), chunk_threshold_);
        docs_.emplace(key, loaded);
        return loaded;
    }

    void put(const std::filesystem::path& path, ApiDocument doc) {
        std::lock_guard lock(mu_);
        docs_[path.lexically_normal().string()] = std::make_shared<const LoadedDoc>(std::move(doc), chunk_threshold_);
    }

private:
    double chunk_threshold_;
    std::map<std::string, std::shared_ptr<const LoadedDoc>> docs_;
    std::mutex mu_;
};

/// Per-task gateway factories. Each task gets fresh instances.
struct Gateways {
    std::function<std::unique_ptr<LlmClient>(const Task&)> make_llm;
    std::function<std::unique_ptr<ApiExecutor>(const Task&, const ApiDocument&)> make_executor;
    std::set<int> success_statuses{200};
    std::vector<std::string> failure_markers;
};

namespace detail {

inline void append_log(SessionLog& into, SessionLog step) {
    for (auto& e : step.static_events) into.static_events.push_back(std::move(e));
    for (auto& r : step.dynamic_records) into.dynamic_records.push_back(std::move(r));
    into.final_request = std::move(step.final_request);
    into.final_response = std::move(step.final_response);
    into.satisfied = step.satisfied;
    into.prompt_tokens += step.prompt_tokens;
    into.completion_tokens += step.completion_tokens;
    into.llm_calls += step.llm_calls;
    if (step.error) into.error = std::move(step.error);
}

} // namespace detail

/// Runs one dataset task. A ground truth with several requests is treated
/// as a sequence of sub-goals; each is a separate run_task in the same LLM
/// session and the task succeeds only if every step does.
inline TaskResult run_dataset_task(const Task& task, const KnowledgeBase& kb, LlmClient& llm, ApiExecutor& executor,
                                   const Gateways& gw, const PipelineConfig& config) {
    const std::size_t steps = task.ground_truth ? std::max<std::size_t>(1, task.ground_truth->size()) : 1;
    TaskResult combined;
    combined.log.task_id = task.id;
    for (std::size_t i = 0; i < steps; ++i) {
        std::optional<ApiRequest> truth;
        if (task.ground_truth && i < task.ground_truth->size()) truth = (*task.ground_truth)[i];
        ExactMatchJudge judge(truth, gw.success_statuses, gw.failure_markers);
        std::string instruction = task.instruction;
        if (steps > 1) {
            instruction += "\n(Step " + std::to_string(i + 1) + " of " + std::to_string(steps) +
                           "; earlier steps are already done.)";
        }
        TaskResult step;
        try {
            step = run_task(instruction, kb, llm, executor, judge, config, task.id);
        } catch (TaskAborted& e) {
            auto partial = e.partial();
            detail::append_log(combined.log, partial.log);
            combined.executed.insert(combined.executed.end(), partial.executed.begin(), partial.executed.end());
            combined.total_llm_calls = combined.log.llm_calls;
            throw TaskAborted(std::move(combined), e.cause(), e.what());
        }
        combined.executed.insert(combined.executed.end(), step.executed.begin(), step.executed.end());
        detail::append_log(combined.log, std::move(step.log));
        if (!step.satisfied) break;
    }
    combined.satisfied = combined.log.satisfied;
    combined.request = combined.log.final_request;
    combined.response = combined.log.final_response;
    combined.total_llm_calls = combined.log.llm_calls;
    return combined;
}

struct BenchmarkRun {
    std::vector<TaskResult> results;  // dataset order
    BenchmarkReport report;
};

inline BenchmarkReport summarize(const std::vector<Task>& tasks, const std::vector<TaskResult>& results) {
    BenchmarkReport report;
    report.n_tasks = results.size();
    report.accuracy_pct = accuracy(results);
    double tokens = 0;
    for (const auto& r : results) tokens += static_cast<double>(r.log.total_tokens());
    report.mean_tokens = tokens / static_cast<double>(results.size());
    if (report.accuracy_pct > 0) report.overhead = overhead(report.mean_tokens, report.accuracy_pct);

    const bool all_truth = std::all_of(tasks.begin(), tasks.end(), [](const Task& t) { return t.ground_truth.has_value(); });
    if (all_truth) {
        std::vector<ProcessSample> samples;
        for (std::size_t i = 0; i < tasks.size(); ++i) samples.push_back({tasks[i].id, results[i].executed, tasks[i].ground_truth});
        report.process_correctness_pct = process_correctness(samples);
    }

    std::vector<ErrorType> first;
    for (const auto& r : results) {
        if (!r.log.static_events.empty()) first.push_back(r.log.static_events.front().finding.error_type);
    }
    report.error_histogram = error_distribution(first);
    return report;
}

/// Runs every task (up to `jobs` at a time), writes one log per task through
/// `sink` when given, and aggregates the report. A failing task is recorded
/// as unsatisfied with its error and never stops the batch.
inline BenchmarkRun run_benchmark(const std::vector<Task>& tasks, DocCache& docs, const Gateways& gw,
                                  const PipelineConfig& config, std::size_t jobs = 1, LogSink* sink = nullptr) {
    if (tasks.empty()) throw EmptyDataset();
    config.validate();

    std::vector<std::shared_ptr<const LoadedDoc>> task_docs;
    for (const auto& t : tasks) task_docs.push_back(docs.get(t.doc_path));

    BenchmarkRun run;
    run.results.resize(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            const auto& task = tasks[i];
            TaskResult result;
            try {
                auto llm = gw.make_llm(task);
                auto exec = gw.make_executor(task, task_docs[i]->doc);
                result = run_dataset_task(task, task_docs[i]->kb(), *llm, *exec, gw, config);
            } catch (const TaskAborted& e) {
                result = e.partial();
                result.satisfied = false;
                result.log.satisfied = false;
            } catch (const std::exception& e) {
                result = TaskResult{};
                result.log.task_id = task.id;
                result.log.error = e.what();
            }
            if (sink) sink->write(result.log);
            run.results[i] = std::move(result);
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, tasks.size());
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    run.report = summarize(tasks, run.results);
    return run;
}

struct Classification {
    std::string task_id;
    ErrorType error_type = ErrorType::NONE;
};

/// Classifies each task's output against its first ground-truth request.
/// Tasks without a recorded output get one fresh single-shot generation.
inline std::vector<Classification> classify_dataset(const std::vector<Task>& tasks, DocCache& docs,
                                                    const std::function<std::unique_ptr<LlmClient>(const Task&)>& make_llm,
                                                    const PipelineConfig& config) {
    std::vector<Classification> out;
    for (const auto& t : tasks) {
        if (!t.ground_truth || t.ground_truth->empty()) throw MissingGroundTruth(t.id);
    }
    for (const auto& t : tasks) {
        auto loaded = docs.get(t.doc_path);
        std::string output;
        if (t.recorded_output) {
            output = *t.recorded_output;
        } else {
            auto llm = make_llm(t);
            output = llm->complete(initial_messages(t.instruction, loaded->doc)).text;
        }
        out.push_back({t.id, classify_against_truth(parse_llm_output(output), t.ground_truth->front(), loaded->doc,
                                                    loaded->model, config.threshold, config.type_rules())});
    }
    return out;
}

} // namespace autofeedback
