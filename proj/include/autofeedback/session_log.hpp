#pragma once

#include "autofeedback/orchestrator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace autofeedback {

using TimestampFn = std::function<std::string()>;

/// Current UTC time as ISO 8601, second resolution.
inline std::string utc_now_iso8601() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// One JSON object per event: static events, dynamic records, then a
/// closing "final" event with the verdict and token totals.
inline std::vector<nlohmann::ordered_json> session_log_events(const SessionLog& log,
                                                              const TimestampFn& ts = utc_now_iso8601) {
    using nlohmann::ordered_json;
    std::vector<ordered_json> out;
    for (const auto& ev : log.static_events) {
        ordered_json j;
        j["task_id"] = log.task_id;
        j["phase"] = "static";
        j["iteration"] = ev.iteration;
        j["action"] = ev.llm_output;
        j["observation"] = nullptr;
        j["thought"] = nullptr;
        j["error_type"] = std::string(to_string(ev.finding.error_type));
        j["feedback"] = ev.feedback.empty() ? ordered_json() : ordered_json(ev.feedback);
        j["new_action"] = nullptr;
        j["ts"] = ts();
        out.push_back(std::move(j));
    }
    for (const auto& r : log.dynamic_records) {
        ordered_json j;
        j["task_id"] = log.task_id;
        j["phase"] = "dynamic";
        j["iteration"] = r.iteration;
        j["action"] = serialize_request(r.action);
        j["observation"] = {{"status", r.observation.response.status},
                            {"body", r.observation.response.body},
                            {"error_message", r.observation.error_message ? ordered_json(r.observation.error_message->text)
                                                                          : ordered_json()}};
        j["thought"] = r.thought;
        j["error_type"] = nullptr;
        j["feedback"] = nullptr;
        j["new_action"] = serialize_request(r.new_action);
        if (!r.note.empty()) j["note"] = r.note;
        j["ts"] = ts();
        out.push_back(std::move(j));
    }
    ordered_json fin;
    fin["task_id"] = log.task_id;
    fin["phase"] = "final";
    fin["satisfied"] = log.satisfied;
    fin["final_request"] = log.final_request ? ordered_json(serialize_request(*log.final_request)) : ordered_json();
    fin["final_response"] = log.final_response
                                ? ordered_json{{"status", log.final_response->status}, {"body", log.final_response->body}}
                                : ordered_json();
    fin["prompt_tokens"] = log.prompt_tokens;
    fin["completion_tokens"] = log.completion_tokens;
    fin["llm_calls"] = log.llm_calls;
    fin["error"] = log.error ? ordered_json(*log.error) : ordered_json();
    fin["ts"] = ts();
    out.push_back(std::move(fin));
    return out;
}

inline void write_session_log(std::ostream& os, const SessionLog& log, const TimestampFn& ts = utc_now_iso8601) {
    for (const auto& j : session_log_events(log, ts)) os << j.dump() << '\n';
}

/// File-name-safe form of a task id.
inline std::string log_file_stem(std::string_view task_id) {
    std::string s;
    for (char c : task_id) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                  c == '_' || c == '.';
        s.push_back(ok ? c : '_');
    }
    return s.empty() ? std::string("task") : s;
}

/// Writes one JSONL file per task into a directory; safe to share across threads.
class LogSink {
public:
    explicit LogSink(std::filesystem::path dir, TimestampFn ts = utc_now_iso8601)
        : dir_(std::move(dir)), ts_(std::move(ts)) {
        std::filesystem::create_directories(dir_);
    }

    std::filesystem::path write(const SessionLog& log) {
        std::lock_guard lock(mu_);
        auto path = dir_ / (log_file_stem(log.task_id) + ".jsonl");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write log file '" + path.string() + "'");
        write_session_log(out, log, ts_);
        return path;
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
    TimestampFn ts_;
    std::mutex mu_;
};

struct SessionDigest {
    std::string task_id;
    std::vector<nlohmann::json> events;
    std::optional<bool> satisfied;  // from the final event, if present
};

struct LogScan {
    std::vector<SessionDigest> sessions;  // first-seen order
    std::vector<std::string> warnings;
};

/// Reads every `*.jsonl` file of a directory (sorted by name). Malformed
/// lines produce a warning and are skipped.
inline LogScan read_log_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("log directory '" + dir.string() + "' is not readable");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());

    LogScan scan;
    std::map<std::string, std::size_t> where;
    for (const auto& f : files) {
        std::ifstream in(f);
        if (!in) throw Error("cannot read log file '" + f.string() + "'");
        std::string line;
        for (std::size_t n = 1; std::getline(in, line); ++n) {
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::parse_error&) {
                scan.warnings.push_back(f.filename().string() + ":" + std::to_string(n) + ": unreadable line skipped");
                continue;
            }
            if (!j.is_object() || !j.contains("task_id") || !j["task_id"].is_string()) {
                scan.warnings.push_back(f.filename().string() + ":" + std::to_string(n) + ": event without task_id skipped");
                continue;
            }
            const auto id = j["task_id"].get<std::string>();
            auto [it, fresh] = where.emplace(id, scan.sessions.size());
            if (fresh) scan.sessions.push_back({id, {}, std::nullopt});
            auto& s = scan.sessions[it->second];
            if (j.value("phase", "") == "final" && j.contains("satisfied") && j["satisfied"].is_boolean()) {
                s.satisfied = j["satisfied"].get<bool>();
            }
            s.events.push_back(std::move(j));
        }
    }
    return scan;
}

namespace detail {

inline std::string first_line(const std::string& s) {
    auto p = s.find('\n');
    return p == std::string::npos ? s : s.substr(0, p) + " ...";
}

inline std::string str_or(const nlohmann::json& j, const char* key, const std::string& dflt = "-") {
    auto it = j.find(key);
    return (it != j.end() && it->is_string()) ? it->get<std::string>() : dflt;
}

} // namespace detail

/// Human-readable per-task timelines, sessions that did not succeed first.
inline std::string render_digest(const LogScan& scan) {
    if (scan.sessions.empty()) return "no sessions\n";
    std::vector<const SessionDigest*> order;
    for (const auto& s : scan.sessions) order.push_back(&s);
    std::stable_sort(order.begin(), order.end(), [](const SessionDigest* a, const SessionDigest* b) {
        return a->satisfied.value_or(false) < b->satisfied.value_or(false);
    });

    std::ostringstream os;
    for (const auto* s : order) {
        const char* status = !s->satisfied ? "INCOMPLETE" : (*s->satisfied ? "satisfied" : "UNSATISFIED");
        os << "== " << s->task_id << " [" << status << "]\n";
        for (const auto& e : s->events) {
            const auto phase = detail::str_or(e, "phase");
            const auto iter = e.contains("iteration") && e["iteration"].is_number() ? std::to_string(e["iteration"].get<long long>()) : "-";
            if (phase == "static") {
                os << "  static #" << iter << " " << detail::str_or(e, "error_type") << "\n";
                os << "    output:   " << detail::first_line(detail::str_or(e, "action")) << "\n";
                if (e.contains("feedback") && e["feedback"].is_string()) {
                    os << "    feedback: " << detail::first_line(e["feedback"].get<std::string>()) << "\n";
                }
            } else if (phase == "dynamic") {
                os << "  dynamic #" << iter << " " << detail::str_or(e, "action") << "\n";
                if (e.contains("observation") && e["observation"].is_object()) {
                    const auto& o = e["observation"];
                    os << "    status:   " << (o.contains("status") ? o["status"].dump() : "-") << "\n";
                    os << "    body:     " << detail::first_line(detail::str_or(o, "body")) << "\n";
                    os << "    retrieved: " << detail::str_or(o, "error_message", "none") << "\n";
                }
                os << "    thought:  " << detail::first_line(detail::str_or(e, "thought")) << "\n";
                os << "    next:     " << detail::str_or(e, "new_action") << "\n";
                if (e.contains("note")) os << "    note:     " << detail::str_or(e, "note") << "\n";
            } else if (phase == "final") {
                os << "  final request: " << detail::str_or(e, "final_request", "none") << "\n";
                if (e.contains("final_response") && e["final_response"].is_object()) {
                    os << "  final status:  " << e["final_response"].value("status", 0) << "\n";
                }
                if (e.contains("error") && e["error"].is_string()) os << "  error: " << e["error"].get<std::string>() << "\n";
            }
        }
    }
    return os.str();
}

} // namespace autofeedback
