#pragma once

#include "mirror/backend.hpp"
#include "mirror/core.hpp"
#include "mirror/orchestrator.hpp"
#include "mirror/prompt.hpp"
#include "mirror/sandbox.hpp"
#include "mirror/trace.hpp"

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mirror {

inline constexpr int kReportSchemaVersion = 1;

// One task of a suite directory:
//   <suite>/<task>/task.json      TaskSpec
//   <suite>/<task>/sandbox.json   tool behaviors
//   <suite>/<task>/script.json    scripted backend (optional)
struct SuiteTask {
    std::string dir;
    TaskSpec task;
    ToolRegistry registry;
    std::optional<std::vector<ScriptStep>> script;
};

SuiteTask load_suite_task(const std::string& task_dir);
// Task subdirectories in lexicographic order. Throws SchemaError listing
// every invalid task (including duplicate ids).
std::vector<SuiteTask> load_suite(const std::string& suite_dir);

// Pass iff the run was Accepted and the task's predicate holds for the
// accepted round.
bool evaluate_predicate(const TaskSpec& task, const RunResult& run);

// Counts of intra-reflection scores 1..10 per agent, index score-1.
struct ScoreHistograms {
    std::map<std::string, std::array<std::int64_t, 10>> by_agent{
        {"planner", {}}, {"tool", {}}, {"answer", {}}};

    std::int64_t total() const;
    ScoreHistograms& operator+=(const ScoreHistograms& o);
    bool operator==(const ScoreHistograms&) const = default;
};

ScoreHistograms histograms_from_trace(const EventTrace& trace);

struct TaskRun {
    std::string task_id;
    int repeat = 1;
    RunStatus status = RunStatus::Running;
    bool pass = false;
    int rounds_used = 0;
    TokenTotals tokens;
    std::optional<int> final_score;
    std::string error;
    std::string trace_digest;

    bool operator==(const TaskRun&) const = default;
};

struct SuiteResult {
    int schema_version = kReportSchemaVersion;
    std::int64_t task_count = 0;
    int repeats = 1;
    std::vector<TaskRun> runs;  // task order, then repeat order
    std::vector<double> pass_rate_per_repeat;
    std::optional<double> pass_rate;        // mean over repeats; unset for an empty suite
    std::optional<double> pass_rate_stdev;  // sample stdev over repeats
    TokenTotals tokens;
    std::optional<double> mean_tokens_per_query;
    std::int64_t aborted = 0;
    ScoreHistograms histograms;

    bool operator==(const SuiteResult&) const = default;
};

using BackendFactory = std::function<std::unique_ptr<ChatBackend>(const SuiteTask& task, int repeat)>;

// Builds a ScriptedBackend from the task's script; throws if it has none.
std::unique_ptr<ChatBackend> scripted_backend_for(const SuiteTask& task, int repeat);

struct EvalOptions {
    RunConfig config;
    int repeats = 1;
    int jobs = 1;
    BackendFactory backend_factory = scripted_backend_for;
    std::string trace_dir;  // when set, <dir>/<task_id>.r<k>.events.jsonl per run
};

// Runs every task `repeats` times, up to `jobs` at once. Aborted runs count
// as failures and never stop the suite. Aggregates do not depend on the
// order in which runs finish.
SuiteResult evaluate(const std::vector<SuiteTask>& tasks, const PromptKit& prompts, const EvalOptions& options);

SuiteResult aggregate(std::int64_t task_count, int repeats, std::vector<TaskRun> runs,
                      const std::vector<ScoreHistograms>& histograms);

Json to_json(const SuiteResult& r);
SuiteResult suite_result_from_json(const Json& j);

std::string format_percent(const std::optional<double>& value);
std::string render_table(const SuiteResult& r);
std::string runs_csv(const SuiteResult& r);
std::string histogram_csv(const SuiteResult& r);

// Writes report.json, report.txt, runs.csv and histogram.csv into out_dir.
void write_report(const SuiteResult& r, const std::string& out_dir);

}  // namespace mirror
