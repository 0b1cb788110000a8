#include "mirror/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace mirror {

SuiteTask load_suite_task(const std::string& task_dir) {
    SuiteTask t;
    t.dir = task_dir;
    t.task = load_task_file(task_dir + "/task.json");
    t.registry = ToolRegistry::load(task_dir + "/sandbox.json");
    if (fs::exists(task_dir + "/script.json")) {
        t.script = ScriptedBackend::steps_from_json(read_json_file(task_dir + "/script.json"));
    }
    return t;
}

std::vector<SuiteTask> load_suite(const std::string& suite_dir) {
    if (!fs::is_directory(suite_dir)) throw Error(ErrorCode::IoError, "suite directory " + suite_dir + " not found");
    std::vector<std::string> dirs;
    for (const auto& entry : fs::directory_iterator(suite_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "task.json")) dirs.push_back(entry.path().string());
    }
    std::sort(dirs.begin(), dirs.end());

    std::vector<SuiteTask> tasks;
    std::vector<std::string> problems;
    for (const auto& d : dirs) {
        try {
            tasks.push_back(load_suite_task(d));
        } catch (const SchemaError& e) {
            for (const auto& p : e.problems()) problems.push_back(d + ": " + p);
        } catch (const Error& e) {
            problems.push_back(d + ": " + e.what());
        }
    }
    std::vector<TaskSpec> specs;
    for (const auto& t : tasks) specs.push_back(t.task);
    for (auto& v : validate_suite(specs).violations) problems.push_back(std::move(v));
    if (!problems.empty()) throw SchemaError(std::move(problems));
    return tasks;
}

namespace {

bool params_cover(const Json& actual, const Json& expected) {
    if (!expected.is_object()) return false;
    for (const auto& [key, value] : expected.items()) {
        auto it = actual.find(key);
        if (it == actual.end() || *it != value) return false;
    }
    return true;
}

}  // namespace

bool evaluate_predicate(const TaskSpec& task, const RunResult& run) {
    if (run.status != RunStatus::Accepted) return false;
    const auto& check = task.success_check;
    switch (check.kind) {
        case PredicateKind::AllNodesSucceeded: {
            if (!run.final_plan || run.final_plan->nodes.empty()) return false;
            return std::all_of(run.final_plan->nodes.begin(), run.final_plan->nodes.end(),
                               [](const PlanNode& n) { return n.status == NodeStatus::Succeeded; });
        }
        case PredicateKind::AnswerContains: {
            if (!run.final_answer) return false;
            return std::all_of(check.required_substrings.begin(), check.required_substrings.end(),
                               [&](const std::string& s) { return run.final_answer->text.find(s) != std::string::npos; });
        }
        case PredicateKind::ExpectedCalls: {
            // Most specific expectations claim steps first.
            std::vector<const ExpectedCall*> expected;
            for (const auto& c : check.expected_calls) expected.push_back(&c);
            std::stable_sort(expected.begin(), expected.end(), [](const ExpectedCall* a, const ExpectedCall* b) {
                return a->parameters.size() > b->parameters.size();
            });
            std::vector<bool> used(run.final_trajectory.size(), false);
            for (const ExpectedCall* want : expected) {
                bool found = false;
                for (std::size_t i = 0; i < run.final_trajectory.size() && !found; ++i) {
                    const auto& step = run.final_trajectory[i];
                    if (used[i] || !step.observation.ok() || step.call.function != want->function) continue;
                    if (!params_cover(step.call.parameters, want->parameters)) continue;
                    used[i] = true;
                    found = true;
                }
                if (!found) return false;
            }
            return true;
        }
    }
    return false;
}

std::int64_t ScoreHistograms::total() const {
    std::int64_t n = 0;
    for (const auto& [agent, counts] : by_agent) n = std::accumulate(counts.begin(), counts.end(), n);
    return n;
}

ScoreHistograms& ScoreHistograms::operator+=(const ScoreHistograms& o) {
    for (const auto& [agent, counts] : o.by_agent) {
        auto& mine = by_agent[agent];
        for (std::size_t i = 0; i < counts.size(); ++i) mine[i] += counts[i];
    }
    return *this;
}

ScoreHistograms histograms_from_trace(const EventTrace& trace) {
    ScoreHistograms h;
    for (const auto& e : trace.events()) {
        if (e.kind != EventKind::AgentOutput) continue;
        const auto it = e.data.find("score");
        if (it == e.data.end() || !it->is_number_integer()) continue;
        const int score = it->get<int>();
        if (score < kMinScore || score > kMaxScore) continue;
        h.by_agent[e.data.at("agent").get<std::string>()][score - 1] += 1;
    }
    return h;
}

std::unique_ptr<ChatBackend> scripted_backend_for(const SuiteTask& task, int) {
    if (!task.script) {
        throw Error(ErrorCode::InvalidArgument, "task " + task.task.id + " has no script.json for the scripted backend");
    }
    return std::make_unique<ScriptedBackend>(*task.script);
}

SuiteResult aggregate(std::int64_t task_count, int repeats, std::vector<TaskRun> runs,
                      const std::vector<ScoreHistograms>& histograms) {
    SuiteResult r;
    r.task_count = task_count;
    r.repeats = repeats;
    std::stable_sort(runs.begin(), runs.end(), [](const TaskRun& a, const TaskRun& b) { return a.repeat < b.repeat; });
    r.runs = std::move(runs);
    std::stable_sort(r.runs.begin(), r.runs.end(), [](const TaskRun& a, const TaskRun& b) {
        return a.task_id != b.task_id ? a.task_id < b.task_id : a.repeat < b.repeat;
    });

    for (const auto& h : histograms) r.histograms += h;
    for (const auto& run : r.runs) {
        r.tokens += run.tokens;
        if (run.status == RunStatus::Aborted) ++r.aborted;
    }
    if (task_count > 0) {
        for (int k = 1; k <= repeats; ++k) {
            const auto passes = std::count_if(r.runs.begin(), r.runs.end(),
                                              [k](const TaskRun& run) { return run.repeat == k && run.pass; });
            r.pass_rate_per_repeat.push_back(100.0 * static_cast<double>(passes) / static_cast<double>(task_count));
        }
        const double n = static_cast<double>(r.pass_rate_per_repeat.size());
        const double mean = std::accumulate(r.pass_rate_per_repeat.begin(), r.pass_rate_per_repeat.end(), 0.0) / n;
        double ss = 0.0;
        for (double v : r.pass_rate_per_repeat) ss += (v - mean) * (v - mean);
        r.pass_rate = mean;
        r.pass_rate_stdev = r.pass_rate_per_repeat.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    if (!r.runs.empty()) {
        r.mean_tokens_per_query = static_cast<double>(r.tokens.total()) / static_cast<double>(r.runs.size());
    }
    return r;
}

SuiteResult evaluate(const std::vector<SuiteTask>& tasks, const PromptKit& prompts, const EvalOptions& options) {
    options.config.validate();
    if (options.repeats < 1) throw Error(ErrorCode::InvalidArgument, "repeats must be >= 1");
    if (!options.trace_dir.empty()) fs::create_directories(options.trace_dir);

    struct Job {
        const SuiteTask* task;
        int repeat;
    };
    std::vector<Job> jobs;
    for (const auto& t : tasks) {
        for (int k = 1; k <= options.repeats; ++k) jobs.push_back({&t, k});
    }
    std::vector<TaskRun> runs(jobs.size());
    std::vector<ScoreHistograms> histograms(jobs.size());

    auto run_job = [&](std::size_t i) {
        const Job& job = jobs[i];
        TaskRun out;
        out.task_id = job.task->task.id;
        out.repeat = job.repeat;
        try {
            auto backend = options.backend_factory(*job.task, job.repeat);
            RunResult result = run_task(job.task->task, options.config, *backend, job.task->registry, prompts);
            out.status = result.status;
            out.pass = evaluate_predicate(job.task->task, result);
            out.rounds_used = result.rounds_used;
            out.tokens = result.tokens;
            if (result.final_answer) out.final_score = result.final_answer->reflection.score();
            out.error = result.error;
            out.trace_digest = result.trace.digest();
            histograms[i] = histograms_from_trace(result.trace);
            if (!options.trace_dir.empty()) {
                write_text_file(options.trace_dir + "/" + out.task_id + ".r" + std::to_string(job.repeat) +
                                    ".events.jsonl",
                                result.trace.to_jsonl());
            }
        } catch (const Error& e) {
            out.status = RunStatus::Aborted;
            out.pass = false;
            out.error = e.what();
        }
        runs[i] = std::move(out);
    };

    const int workers = std::max(1, std::min<int>(options.jobs, static_cast<int>(jobs.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(i);
            });
        }
    }
    return aggregate(static_cast<std::int64_t>(tasks.size()), options.repeats, std::move(runs), histograms);
}

// ---------------------------------------------------------------------------

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_optional_number(const Json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

Json to_json(const TokenTotals& t) {
    return Json{{"prompt_tokens", t.prompt_total}, {"completion_tokens", t.completion_total}, {"calls", t.call_count}};
}

TokenTotals tokens_from_json(const Json& j) {
    return TokenTotals{j.at("prompt_tokens").get<std::int64_t>(), j.at("completion_tokens").get<std::int64_t>(),
                       j.at("calls").get<std::int64_t>()};
}

}  // namespace

Json to_json(const SuiteResult& r) {
    Json j;
    j["schema_version"] = r.schema_version;
    j["task_count"] = r.task_count;
    j["repeats"] = r.repeats;
    j["pass_rate"] = optional_number(r.pass_rate);
    j["pass_rate_stdev"] = optional_number(r.pass_rate_stdev);
    j["pass_rate_per_repeat"] = r.pass_rate_per_repeat;
    j["tokens"] = to_json(r.tokens);
    j["mean_tokens_per_query"] = optional_number(r.mean_tokens_per_query);
    j["aborted"] = r.aborted;
    Json hist = Json::object();
    for (const auto& [agent, counts] : r.histograms.by_agent) hist[agent] = counts;
    j["histograms"] = std::move(hist);
    Json runs = Json::array();
    for (const auto& run : r.runs) {
        runs.push_back(Json{{"task_id", run.task_id},
                            {"repeat", run.repeat},
                            {"status", to_string(run.status)},
                            {"pass", run.pass},
                            {"rounds_used", run.rounds_used},
                            {"tokens", to_json(run.tokens)},
                            {"final_score", run.final_score ? Json(*run.final_score) : Json(nullptr)},
                            {"error", run.error},
                            {"trace_digest", run.trace_digest}});
    }
    j["runs"] = std::move(runs);
    return j;
}

SuiteResult suite_result_from_json(const Json& j) {
    try {
        SuiteResult r;
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kReportSchemaVersion) {
            throw SchemaError({"report schema_version " + std::to_string(r.schema_version) + " is not supported"});
        }
        r.task_count = j.at("task_count").get<std::int64_t>();
        r.repeats = j.at("repeats").get<int>();
        r.pass_rate = read_optional_number(j, "pass_rate");
        r.pass_rate_stdev = read_optional_number(j, "pass_rate_stdev");
        r.pass_rate_per_repeat = j.at("pass_rate_per_repeat").get<std::vector<double>>();
        r.tokens = tokens_from_json(j.at("tokens"));
        r.mean_tokens_per_query = read_optional_number(j, "mean_tokens_per_query");
        r.aborted = j.at("aborted").get<std::int64_t>();
        r.histograms.by_agent.clear();
        for (const auto& [agent, counts] : j.at("histograms").items()) {
            r.histograms.by_agent[agent] = counts.get<std::array<std::int64_t, 10>>();
        }
        for (const auto& rj : j.at("runs")) {
            TaskRun run;
            run.task_id = rj.at("task_id").get<std::string>();
            run.repeat = rj.at("repeat").get<int>();
            auto status = run_status_from_string(rj.at("status").get<std::string>());
            if (!status) throw SchemaError({"unknown run status"});
            run.status = *status;
            run.pass = rj.at("pass").get<bool>();
            run.rounds_used = rj.at("rounds_used").get<int>();
            run.tokens = tokens_from_json(rj.at("tokens"));
            if (!rj.at("final_score").is_null()) run.final_score = rj["final_score"].get<int>();
            run.error = rj.at("error").get<std::string>();
            run.trace_digest = rj.at("trace_digest").get<std::string>();
            r.runs.push_back(std::move(run));
        }
        return r;
    } catch (const Json::exception& e) {
        throw SchemaError({std::string("report: ") + e.what()});
    }
}

std::string format_percent(const std::optional<double>& value) {
    if (!value) return "n/a";
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(1) << *value;
    return ss.str();
}

std::string render_table(const SuiteResult& r) {
    std::ostringstream ss;
    ss << "tasks: " << r.task_count << "  repeats: " << r.repeats << "  runs: " << r.runs.size()
       << "  aborted: " << r.aborted << "\n";
    ss << "pass rate: " << format_percent(r.pass_rate);
    if (r.pass_rate) ss << " +/- " << format_percent(r.pass_rate_stdev);
    ss << "\n";
    ss << "tokens: " << r.tokens.total() << " (prompt " << r.tokens.prompt_total << ", completion "
       << r.tokens.completion_total << ", calls " << r.tokens.call_count << ")\n";
    ss << "mean tokens per query: " << format_percent(r.mean_tokens_per_query) << "\n\n";

    ss << std::left << std::setw(24) << "task" << std::setw(8) << "repeat" << std::setw(11) << "status"
       << std::setw(6) << "pass" << std::setw(8) << "rounds" << std::setw(8) << "score" << "tokens\n";
    for (const auto& run : r.runs) {
        ss << std::left << std::setw(24) << run.task_id << std::setw(8) << run.repeat << std::setw(11)
           << to_string(run.status) << std::setw(6) << (run.pass ? "yes" : "no") << std::setw(8) << run.rounds_used
           << std::setw(8) << (run.final_score ? std::to_string(*run.final_score) : "-") << run.tokens.total()
           << "\n";
    }
    ss << "\nintra-reflection scores   1    2    3    4    5    6    7    8    9   10\n";
    for (const auto& [agent, counts] : r.histograms.by_agent) {
        ss << std::left << std::setw(24) << agent;
        for (auto c : counts) ss << std::right << std::setw(5) << c;
        ss << "\n";
    }
    return ss.str();
}

std::string runs_csv(const SuiteResult& r) {
    std::string out = "task_id,repeat,status,pass,rounds_used,final_score,prompt_tokens,completion_tokens,total_tokens\n";
    for (const auto& run : r.runs) {
        out += run.task_id + "," + std::to_string(run.repeat) + "," + std::string(to_string(run.status)) + "," +
               (run.pass ? "1" : "0") + "," + std::to_string(run.rounds_used) + "," +
               (run.final_score ? std::to_string(*run.final_score) : "") + "," +
               std::to_string(run.tokens.prompt_total) + "," + std::to_string(run.tokens.completion_total) + "," +
               std::to_string(run.tokens.total()) + "\n";
    }
    return out;
}

std::string histogram_csv(const SuiteResult& r) {
    std::string out = "agent,score,count\n";
    for (const auto& [agent, counts] : r.histograms.by_agent) {
        for (std::size_t i = 0; i < counts.size(); ++i) {
            out += agent + "," + std::to_string(i + 1) + "," + std::to_string(counts[i]) + "\n";
        }
    }
    return out;
}

void write_report(const SuiteResult& r, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text_file(out_dir + "/report.json", to_json(r).dump(2) + "\n");
    write_text_file(out_dir + "/report.txt", render_table(r));
    write_text_file(out_dir + "/runs.csv", runs_csv(r));
    write_text_file(out_dir + "/histogram.csv", histogram_csv(r));
}

}  // namespace mirror
