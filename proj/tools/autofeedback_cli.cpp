#include "autofeedback/autofeedback.hpp"
#include "autofeedback/http_gateways.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace autofeedback;

namespace {

enum Exit : int { kOk = 0, kUnsatisfied = 1, kConfig = 2, kTransport = 3 };

struct ConfigError : Error {
    using Error::Error;
};

struct Settings {
    std::string doc;
    std::string dataset;
    std::string llm = "scripted";
    std::string llm_base_url;
    std::string model = "gpt-3.5-turbo";
    std::string executor = "mock";
    std::string api_base_url;
    std::string routes;
    std::string mock_routes;
    std::string script;
    std::string ground_truth;
    std::vector<std::string> failure_markers;
    std::string log_dir = "autofeedback-logs";
    std::string task_id = "run";
    std::size_t jobs = 1;
    PipelineConfig pipeline;
};

nlohmann::json read_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid JSON in ") + what + " '" + path + "': " + e.what());
    }
}

/// Copies config-file values into settings for every flag the user did not pass.
class Overlay {
public:
    Overlay(CLI::App& app, nlohmann::json file) : app_(app), file_(std::move(file)) {
        if (!file_.is_object()) throw ConfigError("config file must hold one flat JSON object");
    }

    template <class T>
    void apply(const std::string& flag, T& target) {
        known_.push_back(flag);
        auto* opt = app_.get_option_no_throw("--" + flag);
        if (opt && opt->count() > 0) return;
        auto it = file_.find(flag);
        if (it == file_.end()) return;
        try {
            target = it->get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config key '" + flag + "' has the wrong type");
        }
    }

    void reject_unknown() const {
        for (const auto& [key, _] : file_.items()) {
            if (std::find(known_.begin(), known_.end(), key) == known_.end()) {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
    }

private:
    CLI::App& app_;
    nlohmann::json file_;
    std::vector<std::string> known_;
};

void add_common(CLI::App& app, Settings& s) {
    app.add_option("--doc", s.doc, "API documentation JSON");
    app.add_option("--llm", s.llm, "LLM gateway")->check(CLI::IsMember({"scripted", "http"}));
    app.add_option("--llm-base-url", s.llm_base_url, "Base URL of an OpenAI-compatible server");
    app.add_option("--model", s.model, "Model name sent to the LLM server");
    app.add_option("--script", s.script, "Scripted LLM replies: JSON array, or object keyed by task id");
    app.add_option("--max-static", s.pipeline.max_static, "Static feedback budget");
    app.add_option("--max-dynamic", s.pipeline.max_dynamic, "Dynamic feedback budget");
    app.add_option("--k", s.pipeline.k, "Number of APIs retrieved per instruction");
    app.add_option("--threshold", s.pipeline.threshold, "Similarity threshold for name suggestions");
    app.add_option("--chunk-threshold", s.pipeline.chunk_threshold, "Similarity threshold for chunk merging");
}

void add_execution(CLI::App& app, Settings& s) {
    app.add_option("--executor", s.executor, "API executor")->check(CLI::IsMember({"mock", "http"}));
    app.add_option("--mock-routes", s.mock_routes, "Mock API rule file");
    app.add_option("--api-base-url", s.api_base_url, "Base URL of the real API server");
    app.add_option("--routes", s.routes, "HTTP route map for the real API server");
    app.add_option("--failure-marker", s.failure_markers, "Response substring that marks a failed call");
    app.add_option("--log-dir", s.log_dir, "Directory receiving session logs");
}

void overlay_all(Overlay& o, Settings& s) {
    o.apply("doc", s.doc);
    o.apply("dataset", s.dataset);
    o.apply("llm", s.llm);
    o.apply("llm-base-url", s.llm_base_url);
    o.apply("model", s.model);
    o.apply("script", s.script);
    o.apply("executor", s.executor);
    o.apply("mock-routes", s.mock_routes);
    o.apply("api-base-url", s.api_base_url);
    o.apply("routes", s.routes);
    o.apply("failure-marker", s.failure_markers);
    o.apply("ground-truth", s.ground_truth);
    o.apply("log-dir", s.log_dir);
    o.apply("task-id", s.task_id);
    o.apply("jobs", s.jobs);
    o.apply("max-static", s.pipeline.max_static);
    o.apply("max-dynamic", s.pipeline.max_dynamic);
    o.apply("k", s.pipeline.k);
    o.apply("threshold", s.pipeline.threshold);
    o.apply("chunk-threshold", s.pipeline.chunk_threshold);
    o.reject_unknown();
}

/// Script replies for one task id; an array applies to every task.
std::vector<std::string> script_for(const nlohmann::json& script, const std::string& task_id) {
    const nlohmann::json* list = &script;
    if (script.is_object()) {
        auto it = script.find(task_id);
        if (it == script.end()) throw ConfigError("script has no replies for task '" + task_id + "'");
        list = &*it;
    }
    if (!list->is_array() || list->empty()) throw ConfigError("script replies must be a non-empty array of strings");
    std::vector<std::string> out;
    for (const auto& r : *list) {
        if (!r.is_string()) throw ConfigError("script replies must be strings");
        out.push_back(r.get<std::string>());
    }
    return out;
}

using LlmFactory = std::function<std::unique_ptr<LlmClient>(const std::string& task_id)>;

LlmFactory make_llm_factory(const Settings& s) {
    if (s.llm == "http") {
        if (s.llm_base_url.empty()) throw ConfigError("--llm http needs --llm-base-url");
        const char* key = std::getenv("AUTOFEEDBACK_LLM_KEY");
        if (!key || !*key) throw ConfigError("--llm http needs the AUTOFEEDBACK_LLM_KEY environment variable");
        Endpoint::parse(s.llm_base_url);
        return [url = s.llm_base_url, model = s.model, k = std::string(key)](const std::string&) {
            return std::make_unique<HttpLlmClient>(url, model, k);
        };
    }
    if (s.script.empty()) throw ConfigError("--llm scripted needs --script");
    auto script = read_json_file(s.script, "script");
    if (!script.is_array() && !script.is_object()) throw ConfigError("script must be a JSON array or object");
    return [script = std::move(script)](const std::string& task_id) {
        return std::make_unique<ScriptedLlm>(script_for(script, task_id));
    };
}

using ExecutorFactory = std::function<std::unique_ptr<ApiExecutor>(const ApiDocument&)>;

ExecutorFactory make_executor_factory(const Settings& s) {
    if (s.executor == "http") {
        if (s.api_base_url.empty()) throw ConfigError("--executor http needs --api-base-url");
        if (s.routes.empty()) throw ConfigError("--executor http needs --routes");
        auto routes = HttpApiExecutor::routes_from_json(read_json_file(s.routes, "route map"));
        Endpoint::parse(s.api_base_url);
        return [url = s.api_base_url, routes = std::move(routes)](const ApiDocument&) {
            return std::make_unique<HttpApiExecutor>(url, routes);
        };
    }
    nlohmann::json rules;
    if (!s.mock_routes.empty()) rules = read_json_file(s.mock_routes, "mock route file");
    MockApiServer::from_json(rules);  // fail early on a malformed file
    return [rules = std::move(rules)](const ApiDocument& doc) {
        return std::make_unique<MockApiServer>(MockApiServer::from_json(rules, &doc));
    };
}

ApiDocument load_doc_or_fail(const std::string& path) {
    if (path.empty()) throw ConfigError("--doc is required");
    if (!fs::is_regular_file(path)) throw ConfigError("documentation file '" + path + "' not found");
    try {
        return load_document(path);
    } catch (const SchemaError& e) {
        throw ConfigError("documentation file '" + path + "': " + e.what());
    }
}

std::vector<Task> load_dataset_or_fail(const std::string& path) {
    if (path.empty()) throw ConfigError("--dataset is required");
    if (!fs::is_regular_file(path)) throw ConfigError("dataset file '" + path + "' not found");
    try {
        auto tasks = load_dataset(path);
        if (tasks.empty()) throw ConfigError("dataset '" + path + "' contains no tasks");
        return tasks;
    } catch (const DatasetError& e) {
        throw ConfigError("dataset '" + path + "' line " + std::to_string(e.line()) + ": " + e.what());
    }
}

bool is_transport(const std::exception_ptr& p) {
    try {
        if (p) std::rethrow_exception(p);
    } catch (const TransportError&) {
        return true;
    } catch (const ProtocolError&) {
        return true;
    } catch (...) {
    }
    return false;
}

int cmd_run(const std::string& instruction, Settings& s) {
    auto doc = load_doc_or_fail(s.doc);
    if (doc.empty()) throw ConfigError("documentation file '" + s.doc + "' contains no APIs");
    std::optional<ApiRequest> truth;
    if (!s.ground_truth.empty()) {
        auto g = parse_request(s.ground_truth);
        if (!g.parsed()) throw ConfigError("--ground-truth is not a valid request: " + g.failure().detail);
        truth = g.request();
    }
    auto llm = make_llm_factory(s)(s.task_id);
    auto executor = make_executor_factory(s)(doc);
    LoadedDoc loaded(std::move(doc), s.pipeline.chunk_threshold);
    ExactMatchJudge judge(truth, {200}, s.failure_markers);
    LogSink sink(s.log_dir);

    TaskResult result;
    int code = kOk;
    try {
        result = run_task(instruction, loaded.kb(), *llm, *executor, judge, s.pipeline, s.task_id);
    } catch (const TaskAborted& e) {
        result = e.partial();
        std::cerr << "error: " << e.what() << "\n";
        code = is_transport(e.cause()) ? kTransport : kUnsatisfied;
    }
    const auto path = sink.write(result.log);
    if (code == kOk && !result.satisfied) code = kUnsatisfied;

    std::cout << "satisfied: " << (result.satisfied ? "yes" : "no") << "\n"
              << "request:   " << (result.request ? serialize_request(*result.request) : std::string("none")) << "\n";
    if (result.response) std::cout << "status:    " << result.response->status << "\n";
    std::cout << "static:    " << result.log.static_events.size() << " round(s)\n"
              << "dynamic:   " << result.log.dynamic_records.size() << " round(s)\n"
              << "llm calls: " << result.total_llm_calls << "\n"
              << "tokens:    " << result.log.total_tokens() << "\n"
              << "log:       " << path.string() << "\n";
    return code;
}

int cmd_bench(Settings& s) {
    auto tasks = load_dataset_or_fail(s.dataset);
    DocCache docs(s.pipeline.chunk_threshold);
    for (const auto& t : tasks) {
        try {
            docs.get(t.doc_path);
        } catch (const std::exception& e) {
            throw ConfigError("task '" + t.id + "': " + e.what());
        }
    }
    auto llm_factory = make_llm_factory(s);
    auto exec_factory = make_executor_factory(s);
    Gateways gw;
    gw.make_llm = [&](const Task& t) { return llm_factory(t.id); };
    gw.make_executor = [&](const Task&, const ApiDocument& doc) { return exec_factory(doc); };
    gw.failure_markers = s.failure_markers;

    LogSink sink(s.log_dir);
    auto run = run_benchmark(tasks, docs, gw, s.pipeline, s.jobs, &sink);

    const auto dir = fs::path(s.log_dir);
    std::ofstream(dir / "report.json", std::ios::binary) << run.report.to_json().dump(2) << "\n";
    const auto table = run.report.to_text_table();
    std::ofstream(dir / "report.txt", std::ios::binary) << table;
    std::cout << table;
    return kOk;
}

int cmd_classify(Settings& s) {
    auto tasks = load_dataset_or_fail(s.dataset);
    DocCache docs(s.pipeline.chunk_threshold);
    LlmFactory llm_factory;
    const bool all_recorded =
        std::all_of(tasks.begin(), tasks.end(), [](const Task& t) { return t.recorded_output.has_value(); });
    if (!all_recorded) llm_factory = make_llm_factory(s);

    std::vector<Classification> classes;
    try {
        classes = classify_dataset(
            tasks, docs, [&](const Task& t) { return llm_factory(t.id); }, s.pipeline);
    } catch (const MissingGroundTruth& e) {
        throw ConfigError(e.what());
    }

    std::vector<ErrorType> types;
    nlohmann::ordered_json per_task = nlohmann::ordered_json::array();
    for (const auto& c : classes) {
        types.push_back(c.error_type);
        per_task.push_back({{"id", c.task_id}, {"error_type", std::string(to_string(c.error_type))}});
    }
    const auto hist = error_distribution(types);
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (const auto& [t, n] : hist) counts[std::string(to_string(t))] = n;
    nlohmann::ordered_json pct = nlohmann::ordered_json::object();
    for (const auto& [t, p] : error_percentages(hist)) pct[std::string(to_string(t))] = std::round(p * 100) / 100;
    nlohmann::ordered_json out{{"n_tasks", classes.size()}, {"histogram", counts}, {"percentages", pct},
                               {"tasks", per_task}};
    std::cout << out.dump(2) << "\n";
    return kOk;
}

int cmd_report(const std::string& dir) {
    if (dir.empty()) throw ConfigError("report needs a log directory");
    LogScan scan;
    try {
        scan = read_log_dir(dir);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    for (const auto& w : scan.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << render_digest(scan);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Static and dynamic feedback for LLM-generated API requests"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "Flat JSON file with defaults for any flag");

    Settings s;
    std::string instruction;
    std::string report_dir;

    auto* run = app.add_subcommand("run", "Run one instruction through the pipeline");
    run->add_option("instruction", instruction, "User instruction")->required();
    add_common(*run, s);
    add_execution(*run, s);
    run->add_option("--ground-truth", s.ground_truth, "Expected request; the judge accepts only this call");
    run->add_option("--task-id", s.task_id, "Task id used in the log");

    auto* bench = app.add_subcommand("bench", "Run a dataset and write a report");
    bench->add_option("--dataset", s.dataset, "Dataset JSONL");
    add_common(*bench, s);
    add_execution(*bench, s);
    bench->add_option("--jobs", s.jobs, "Tasks run in parallel")->check(CLI::PositiveNumber);

    auto* classify = app.add_subcommand("classify", "Classify outputs against ground truth");
    classify->add_option("--dataset", s.dataset, "Dataset JSONL with ground truth");
    add_common(*classify, s);

    auto* report = app.add_subcommand("report", "Print session digests from a log directory");
    report->add_option("dir", report_dir, "Log directory");
    report->add_option("--log-dir", s.log_dir, "Log directory");

    for (auto* sub : {run, bench, classify, report}) {
        sub->add_option("--config", config_path, "Flat JSON file with defaults for any flag");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (!config_path.empty()) {
            auto* active = app.get_subcommands().front();
            Overlay overlay(*active, read_json_file(config_path, "config file"));
            overlay_all(overlay, s);
        }
        s.pipeline.validate();
        if (run->parsed()) return cmd_run(instruction, s);
        if (bench->parsed()) return cmd_bench(s);
        if (classify->parsed()) return cmd_classify(s);
        return cmd_report(report_dir.empty() ? s.log_dir : report_dir);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const TransportError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kTransport;
    } catch (const ProtocolError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kTransport;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    }
}
