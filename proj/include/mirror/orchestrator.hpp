#pragma once

#include "mirror/agents.hpp"
#include "mirror/backend.hpp"
#include "mirror/core.hpp"
#include "mirror/memory.hpp"
#include "mirror/prompt.hpp"
#include "mirror/sandbox.hpp"
#include "mirror/trace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mirror {

enum class RunStatus { Running, Accepted, Exhausted, Aborted };

std::string_view to_string(RunStatus status);
std::optional<RunStatus> run_status_from_string(std::string_view name);

struct RunState {
    explicit RunState(const TaskSpec& t) : task(&t), ltm(t.id) {}

    const TaskSpec* task;
    int round = 0;
    LongTermMemory ltm;
    ShortTermMemory stm;
    std::optional<Plan> current_plan;
    std::vector<TrajectoryStep> trajectory;
    RunStatus status = RunStatus::Running;

    // Best answer so far: highest score, ties go to the earliest round.
    std::optional<FinalAnswer> best_answer;
    int best_answer_round = 0;
    std::optional<Plan> best_plan;
    std::vector<TrajectoryStep> best_trajectory;
    int failed_rounds = 0;
};

struct RunResult {
    std::string task_id;
    RunStatus status = RunStatus::Running;
    std::optional<FinalAnswer> final_answer;
    int final_answer_round = 0;
    // Plan and steps of the round that produced final_answer.
    std::optional<Plan> final_plan;
    std::vector<TrajectoryStep> final_trajectory;
    int rounds_used = 0;
    TokenTotals tokens;
    EventTrace trace;
    std::string error;  // set when Aborted
};

// Everything one run needs besides the task. The sandbox session holds the
// per-run tool counters and must not be shared across concurrent runs.
struct RunContext {
    const RunConfig& config;
    ChatBackend& backend;
    const PromptKit& prompts;
    SandboxSession& sandbox;
    EventTrace& trace;
    TokenTotals tokens;
};

// One plan -> execute -> answer cycle. Advances state.round, and leaves
// state.status Running unless the answer was accepted. Throws whatever the
// agents throw (ParseExhausted, backend errors).
void run_round(RunState& state, RunContext& ctx);

// Full round loop bounded by config.max_rounds. Never throws for backend or
// parse failures: those end the run as Aborted with the partial trace kept.
RunResult run_task(const TaskSpec& task, const RunConfig& config, ChatBackend& backend, const ToolRegistry& registry,
                   const PromptKit& prompts);

// Totals recomputed from agent_output events.
TokenTotals fold_tokens(const EventTrace& trace);

}  // namespace mirror
