#pragma once

#include "mirror/backend.hpp"
#include "mirror/core.hpp"
#include "mirror/memory.hpp"
#include "mirror/prompt.hpp"
#include "mirror/trace.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mirror {

enum class AgentRole { Planner, Tool, Answer };

std::string_view to_string(AgentRole role);

// Intra-reflection gate. Uniform "score >= threshold" for all three agents.
constexpr bool gate(int score, int threshold) noexcept { return score >= threshold; }

// Index of the highest score; ties go to the earliest attempt.
std::size_t best_attempt(std::span<const int> scores);

struct GateDecision {
    std::optional<std::size_t> accepted;  // unset: keep revising
    bool forced = false;
};

// Decision after the attempts seen so far. The newest attempt is accepted if
// it passes; once revision_cap attempts have failed, the best one is taken
// with forced = true.
GateDecision decide_gate(std::span<const int> scores, int threshold, int revision_cap);

template <class T>
struct GateOutcome {
    T value;
    int attempts = 1;         // revision attempts used
    bool forced = false;      // revision cap exhausted, best-of-attempts taken
    bool passed = true;       // value's score cleared the threshold
    bool divergence = false;  // tool agent picked a function other than the plan's
    int backend_calls = 0;
};

// What an agent needs for one invocation. Memory is passed by const
// reference only; agents never write to it.
struct AgentContext {
    ChatBackend& backend;
    const PromptKit& prompts;
    const RunConfig& config;
    EventTrace* trace = nullptr;
    int round = 0;
    TokenTotals* tokens = nullptr;  // run-level accumulator, optional
};

// Tool list as shown to the planner and the tool agent.
std::string render_functions(const std::vector<ToolSpec>& tools);

// Observations of the succeeded nodes of this round, in node order.
using RelatedOutputs = std::vector<std::pair<std::string, std::string>>;  // node_id -> text
std::string render_related_outputs(const RelatedOutputs& related);

// Throws ParseExhausted or propagates backend errors.
GateOutcome<Plan> plan(const TaskSpec& task, const LongTermMemory& ltm, AgentContext& ctx);

GateOutcome<ToolCall> select_tool(const TaskSpec& task, const PlanNode& node, const RelatedOutputs& related,
                                  const ShortTermMemory& stm, AgentContext& ctx);

// One gate check, no local revision: a failed gate comes back with
// passed = false so the caller can start a new round.
GateOutcome<FinalAnswer> answer(const TaskSpec& task, const std::optional<Plan>& plan,
                                const std::vector<TrajectoryStep>& trajectory, AgentContext& ctx);

}  // namespace mirror
