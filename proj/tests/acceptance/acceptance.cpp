// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include "autofeedback/autofeedback.hpp"
#include "support/corpus.hpp"
#include "support/fixtures.hpp"
#include "support/oracle_tfidf.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#ifndef AF_CLI_PATH
#error "AF_CLI_PATH must name the command-line binary"
#endif

using namespace autofeedback;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

Verdict classification_suite() {
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    corpus::Generator gen(fixtures::doc());
    auto samples = gen.classification_corpus(20240501);
    const auto& kb = fixtures::loaded();
    std::map<ErrorType, std::pair<int, int>> tally;
    for (const auto& s : samples) {
        auto f = detect(parse_llm_output(s.output), s.instruction, kb.doc, kb.model);
        auto& [ok, n] = tally[s.expected];
        ++n;
        if (f.error_type == s.expected) {
            ++ok;
        } else {
            v.fail("expected " + std::string(to_string(s.expected)) + " got " + std::string(to_string(f.error_type)) +
                   " for " + s.output);
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (samples.size() != 240) v.fail("corpus has " + std::to_string(samples.size()) + " samples");
    if (secs >= 5.0) v.fail("took " + std::to_string(secs) + " s");
    if (v.pass) {
        std::ostringstream os;
        os << samples.size() << " samples, 8 classes x 30 exact, " << std::fixed;
        os.precision(2);
        os << secs << " s";
        v.detail = os.str();
    }
    return v;
}

Verdict arity_property() {
    Verdict v;
    corpus::Generator gen(fixtures::doc());
    corpus::Rng rng(7);
    const auto& kb = fixtures::loaded();
    std::map<ErrorType, int> seen;
    for (int i = 0; i < 1000; ++i) {
        auto s = gen.random(rng);
        auto f = detect(parse_llm_output(s.output), s.instruction, kb.doc, kb.model);
        ++seen[f.error_type];
        if (!satisfies_return_arity(f)) v.fail("arity broken for " + std::string(to_string(f.error_type)));
    }
    if (v.pass) v.detail = "1000 findings over " + std::to_string(seen.size()) + " error types";
    return v;
}

Verdict ordering_property() {
    Verdict v;
    corpus::Generator gen(fixtures::doc());
    corpus::Rng rng(11);
    const auto& kb = fixtures::loaded();
    for (int i = 0; i < 500; ++i) {
        auto s = gen.multi(rng);
        auto f = detect(parse_llm_output(s.output), s.instruction, kb.doc, kb.model);
        if (f.error_type != s.expected) {
            v.fail("expected " + std::string(to_string(s.expected)) + " got " + std::string(to_string(f.error_type)) +
                   " for " + s.output);
        }
    }
    if (v.pass) v.detail = "500 multi-fault requests";
    return v;
}

Verdict overhead_rows() {
    Verdict v;
    const double a = overhead(919.45, 70.69), b = overhead(1338.03, 75.00);
    if (std::abs(a - 13.01) > 0.01) v.fail("row 1 gives " + std::to_string(a));
    if (std::abs(b - 17.84) > 0.01) v.fail("row 2 gives " + std::to_string(b));
    if (v.pass) v.detail = std::to_string(a) + ", " + std::to_string(b);
    return v;
}

Verdict variance_values() {
    Verdict v;
    const std::vector<double> x{1, 0, 0}, y{1, 1, 0};
    const double a = population_variance(x), b = population_variance(y);
    if (std::abs(a - 0.2222) > 1e-4) v.fail("[1,0,0] gives " + std::to_string(a));
    if (std::abs(b - 0.2222) > 1e-4) v.fail("[1,1,0] gives " + std::to_string(b));
    if (v.pass) v.detail = std::to_string(a) + ", " + std::to_string(b);
    return v;
}

Verdict spearman_values() {
    Verdict v;
    const std::vector<double> x{1, 2, 3, 4, 5}, rev{5, 4, 3, 2, 1}, swap{1, 2, 3, 5, 4};
    if (spearman(x, x) != 1.0) v.fail("identity");
    if (spearman(x, rev) != -1.0) v.fail("reversal");
    // 1 - 6 * sum(d^2) / (n (n^2 - 1)) with d^2 summing to 2 and n = 5
    const double brute = 1.0 - 6.0 * 2.0 / (5.0 * 24.0);
    if (std::abs(spearman(x, swap) - brute) > 1e-9) v.fail("single swap gives " + std::to_string(spearman(x, swap)));
    if (v.pass) v.detail = "1, -1, " + std::to_string(brute);
    return v;
}

Verdict static_convergence() {
    Verdict v;
    const auto& kb = fixtures::loaded();
    ScriptedLlm llm({"<<API>>user_login(username=\"alice\", password=\"secret\")<</API>>",
                     "<<API>>userLogin(username=\"alice\", password=\"secret\")<</API>>"});
    auto server = fixtures::route_server();
    ExactMatchJudge judge;
    auto r = run_task("Log in to my account as alice with the password secret.", kb.kb(), llm, server, judge, {});
    if (!r.satisfied) v.fail("not satisfied");
    if (r.log.static_events.size() != 2) v.fail("static events: " + std::to_string(r.log.static_events.size()));
    if (r.total_llm_calls != 2) v.fail("llm calls: " + std::to_string(r.total_llm_calls));
    if (server.calls() != 1) v.fail("executor calls: " + std::to_string(server.calls()));
    if (!r.log.static_events.empty()) {
        const auto& fb = r.log.static_events.front().feedback;
        for (std::string needle : {std::string("user_login"), std::string("userLogin"), std::string(kRegenerateSentence)}) {
            if (fb.find(needle) == std::string::npos) v.fail("feedback lacks '" + needle + "'");
        }
        const auto prompts = llm.prompts();
        if (prompts.size() < 2 || prompts[1].back().content.find(fb) == std::string::npos) {
            v.fail("feedback not sent in the second prompt");
        }
    }
    if (v.pass) v.detail = "1 feedback round, 2 LLM calls, 1 execution";
    return v;
}

Verdict dynamic_convergence() {
    Verdict v;
    const auto& kb = fixtures::loaded();
    ScriptedLlm llm({"<<API>>route_planning(origin=\"39.99,116.48\", destination=\"39.91,116.40\")<</API>>",
                     "Thought: longitude precedes latitude, so both points are swapped.\n"
                     "<<API>>route_planning(origin=\"116.48,39.99\", destination=\"116.40,39.91\")<</API>>"});
    auto server = fixtures::route_server();
    ExactMatchJudge judge(std::nullopt, {200}, {"info_code:20000"});
    auto r = run_task("Plan a driving path from 116.48,39.99 to 116.40,39.91 on the map.", kb.kb(), llm, server,
                      judge, {});
    if (!r.satisfied) v.fail("not satisfied");
    if (r.log.dynamic_records.size() != 1) {
        v.fail("feedback records: " + std::to_string(r.log.dynamic_records.size()));
    } else {
        const auto& rec = r.log.dynamic_records.front();
        if (rec.observation.response.body.find("info_code:20000") == std::string::npos) v.fail("body lacks info_code");
        if (!rec.observation.error_message ||
            rec.observation.error_message->text.find("Longitude precedes latitude") == std::string::npos) {
            v.fail("retrieved: " + (rec.observation.error_message ? rec.observation.error_message->text : "none"));
        }
    }
    if (v.pass) v.detail = "retrieved '" + r.log.dynamic_records.front().observation.error_message->text + "'";
    return v;
}

Verdict budget_law() {
    Verdict v;
    const auto& kb = fixtures::loaded();
    const std::string instruction = "Plan a driving path from 116.48,39.99 to 116.40,39.91 on the map.";
    const std::string wrong = "<<API>>route_planning(origin=\"1,2\", destination=\"3,4\")<</API>>";
    const std::vector<std::string> garbage{"no idea"};
    const std::vector<std::string> worst{"no idea", "still no idea", "route_planning(", wrong, "no idea"};

    auto run = [&](const std::vector<std::string>& script, std::size_t s, std::size_t d, std::size_t& calls,
                   std::size_t& executions) {
        ScriptedLlm llm(script);
        auto server = fixtures::route_server();
        ExactMatchJudge judge(std::nullopt, {200}, {"info_code:20000"});
        PipelineConfig cfg;
        cfg.max_static = s;
        cfg.max_dynamic = d;
        auto r = run_task(instruction, kb.kb(), llm, server, judge, cfg);
        calls = llm.calls();
        executions = server.calls();
        return r;
    };
    std::size_t calls = 0, ex = 0;
    for (const auto* script : {&garbage, &worst}) {
        auto r = run(*script, 3, 2, calls, ex);
        if (r.satisfied) v.fail("adversary satisfied");
        if (calls > 1 + 3 + 2 * 2) v.fail("default budgets used " + std::to_string(calls) + " calls");
        if (calls != r.total_llm_calls) v.fail("call accounting mismatch");
    }
    const std::size_t worst_calls = calls;
    for (const auto* script : {&garbage, &worst}) {
        auto r = run(*script, 0, 0, calls, ex);
        if (r.satisfied) v.fail("zero-budget adversary satisfied");
        if (calls != 1) v.fail("zero budgets used " + std::to_string(calls) + " calls");
        if (ex > 1) v.fail("zero budgets executed " + std::to_string(ex) + " times");
    }
    ScriptedLlm llm({wrong});
    auto server = fixtures::route_server();
    ExactMatchJudge judge(std::nullopt, {200}, {"info_code:20000"});
    PipelineConfig zero;
    zero.max_static = zero.max_dynamic = 0;
    run_task(instruction, kb.kb(), llm, server, judge, zero);
    if (llm.calls() != 1 || server.calls() != 1) v.fail("zero budgets with a clean request");
    if (v.pass) v.detail = "worst case " + std::to_string(worst_calls) + " of 8 calls; zero budgets 1 call";
    return v;
}

Verdict round_trip() {
    Verdict v;
    corpus::Rng rng(99);
    for (int i = 0; i < 1000; ++i) {
        auto r = corpus::random_request(rng);
        auto text = serialize_request(r);
        auto back = parse_request(text);
        if (!back.parsed()) {
            v.fail("unparseable: " + text);
        } else if (!(back.request() == r)) {
            v.fail("mismatch: " + text);
        }
    }
    if (v.pass) v.detail = "1000 requests";
    return v;
}

std::string strip_ts(const std::string& jsonl) {
    std::istringstream in(jsonl);
    std::string line, out;
    while (std::getline(in, line)) {
        auto j = nlohmann::ordered_json::parse(line);
        j.erase("ts");
        out += j.dump() + "\n";
    }
    return out;
}

Verdict bench_determinism() {
    Verdict v;
    const auto root = fixtures::scratch("acceptance-bench");
    auto bench = [&](const std::string& name, int jobs) {
        const auto dir = root / name;
        std::string cmd = std::string("\"") + AF_CLI_PATH + "\" bench --dataset \"" +
                          (fixtures::data_dir() / "fixture_dataset.jsonl").string() + "\" --script \"" +
                          (fixtures::data_dir() / "fixture_script.json").string() + "\" --mock-routes \"" +
                          (fixtures::data_dir() / "fixture_mock_routes.json").string() +
                          "\" --failure-marker info_code:20000 --jobs " + std::to_string(jobs) + " --log-dir \"" +
                          dir.string() + "\" > \"" + (root / (name + ".out")).string() + "\" 2>&1";
        if (std::system(cmd.c_str()) != 0) v.fail("bench run '" + name + "' failed");
        return dir;
    };
    const auto a = bench("a", 1), b = bench("b", 4);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        const auto name = e.path().filename();
        if (!fs::exists(b / name)) {
            v.fail("second run lacks " + name.string());
            continue;
        }
        std::string x = fixtures::slurp(e.path()), y = fixtures::slurp(b / name);
        if (e.path().extension() == ".jsonl") {
            x = strip_ts(x);
            y = strip_ts(y);
        }
        if (x != y) v.fail(name.string() + " differs");
        ++files;
    }
    if (files < 12) v.fail("only " + std::to_string(files) + " output files");
    if (v.pass) v.detail = std::to_string(files) + " files identical across two runs";
    return v;
}

std::vector<std::string> sentences_of(const std::string& text) {
    static const std::regex re(R"([^\n]*?[.?!](?=\s)|[^\n]+)");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        auto s = it->str();
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        if (b != std::string::npos) out.push_back(s.substr(b, e - b + 1));
    }
    return out;
}

Verdict chunk_coverage() {
    Verdict v;
    const auto& doc = fixtures::doc();
    const auto& kb = fixtures::loaded();
    const auto ref = oracle::TfIdf::for_document(doc);

    for (const auto& api : doc.apis) {
        std::vector<std::string> expected = sentences_of(api.description);
        for (const auto& p : api.params) {
            for (auto& s : sentences_of(p.description)) expected.push_back(s);
        }
        for (const auto& e : api.exceptions) expected.push_back("Error " + e.code + ": " + e.message);
        std::vector<std::string> got;
        const auto* chunks = kb.index.chunks_for(api.name);
        if (!chunks) {
            v.fail(api.name + " has no chunks");
            continue;
        }
        for (const auto& c : *chunks) got.insert(got.end(), c.sentences.begin(), c.sentences.end());
        if (got != expected) v.fail(api.name + ": chunks do not partition the sentences");
    }

    corpus::Rng rng(3);
    std::vector<std::string> vocab;
    for (const auto& api : doc.apis) {
        for (auto& w : oracle::words(api.description)) vocab.push_back(w);
        for (const auto& e : api.exceptions) {
            for (auto& w : oracle::words(e.code + " " + e.message)) vocab.push_back(w);
        }
    }
    vocab.push_back("zzz_unseen");
    int ties = 0;
    for (int q = 0; q < 100; ++q) {
        const auto& api = doc.apis[rng.below(doc.size())];
        std::string query;
        for (std::size_t i = 0, n = 1 + rng.below(8); i < n; ++i) query += vocab[rng.below(vocab.size())] + " ";
        auto got = retrieve_error_message(api.name, query, kb.index, kb.model);
        const auto& chunks = *kb.index.chunks_for(api.name);
        const auto qv = ref.embed(query);
        std::vector<double> scores;
        for (const auto& c : chunks) scores.push_back(oracle::TfIdf::cosine(qv, ref.embed(c.text)));
        const double best = *std::max_element(scores.begin(), scores.end());
        if (!got) {
            v.fail("no message for " + api.name);
            continue;
        }
        bool is_argmax = false;
        int n_best = 0;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            if (std::abs(scores[i] - best) <= 1e-12) {
                ++n_best;
                if (chunks[i].text == got->text) is_argmax = true;
            }
        }
        if (n_best > 1) ++ties;
        if (!is_argmax) v.fail("query '" + query + "' picked a non-maximal chunk of " + api.name);
    }
    if (v.pass) v.detail = "all sentences covered once; 100 queries match (" + std::to_string(ties) + " ties)";
    return v;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"error classification corpus", classification_suite},
        {"return-value arity property", arity_property},
        {"stage ordering property", ordering_property},
        {"overhead formula", overhead_rows},
        {"population variance", variance_values},
        {"spearman correlation", spearman_values},
        {"static convergence end to end", static_convergence},
        {"dynamic convergence end to end", dynamic_convergence},
        {"iteration budgets", budget_law},
        {"parse/serialize round trip", round_trip},
        {"bench determinism", bench_determinism},
        {"chunk coverage and retrieval argmax", chunk_coverage},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.fail(std::string("exception: ") + e.what());
        }
        if (!v.pass) ++failed;
        std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << ": " << criteria[i].first << " ("
                  << v.detail << ")\n";
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria pass\n";
    return failed == 0 ? 0 : 1;
}
