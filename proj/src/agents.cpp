#include "mirror/agents.hpp"

#include <algorithm>

namespace mirror {

std::string_view to_string(AgentRole role) {
    switch (role) {
        case AgentRole::Planner: return "planner";
        case AgentRole::Tool: return "tool";
        case AgentRole::Answer: return "answer";
    }
    return "planner";
}

std::size_t best_attempt(std::span<const int> scores) {
    if (scores.empty()) throw Error(ErrorCode::InvalidArgument, "best_attempt of no scores");
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return best;
}

GateDecision decide_gate(std::span<const int> scores, int threshold, int revision_cap) {
    GateDecision d;
    if (scores.empty()) return d;
    if (gate(scores.back(), threshold)) {
        d.accepted = scores.size() - 1;
    } else if (static_cast<int>(scores.size()) >= revision_cap) {
        d.accepted = best_attempt(scores);
        d.forced = true;
    }
    return d;
}

std::string render_functions(const std::vector<ToolSpec>& tools) {
    Json arr = Json::array();
    for (const auto& t : tools) arr.push_back(to_json(t));
    return arr.dump(2);
}

std::string render_related_outputs(const RelatedOutputs& related) {
    if (related.empty()) return "No results from previous subtasks.";
    std::string out;
    for (const auto& [node_id, text] : related) {
        if (!out.empty()) out += "\n";
        out += node_id + ": " + text;
    }
    return out;
}

namespace {

bool is_parse_failure(const Error& e) {
    switch (e.code()) {
        case ErrorCode::NoJsonFound:
        case ErrorCode::MalformedJson:
        case ErrorCode::SchemaError:
        case ErrorCode::InvalidArgument:
            return true;
        default:
            return false;
    }
}

Json base_output_event(AgentRole role, int attempt, int try_index, const ChatResponse& resp) {
    Json j;
    j["agent"] = to_string(role);
    j["attempt"] = attempt;
    j["try"] = try_index;
    j["prompt_tokens"] = resp.prompt_tokens;
    j["completion_tokens"] = resp.completion_tokens;
    return j;
}

template <class T>
struct ParsedReply {
    T value;
    Json json;
    ChatResponse response;
    int try_index;
};

// One revision attempt. Malformed or schema-invalid replies are re-requested
// with a correction line until parse_retry_cap failures in a row.
template <class T, class Parse>
ParsedReply<T> call_parsed(AgentRole role, int attempt, const std::string& system, const std::string& user,
                           Parse&& parse, AgentContext& ctx, int& backend_calls) {
    std::string prompt = user;
    for (int t = 1;; ++t) {
        ChatRequest request{system, prompt, ctx.config.model, ctx.config.temperature};
        if (ctx.trace) {
            ctx.trace->emit(EventKind::AgentCall, ctx.round,
                            Json{{"agent", to_string(role)},
                                 {"attempt", attempt},
                                 {"try", t},
                                 {"prompt_hash", sha256_hex(system + "\n\n" + prompt).substr(0, 16)}});
        }
        ChatResponse response = ctx.backend.complete(request);
        ++backend_calls;
        if (ctx.tokens) *ctx.tokens += TokenTotals{response.prompt_tokens, response.completion_tokens, 1};
        try {
            Json json = extract_json(response.text);
            T value = parse(json);
            return ParsedReply<T>{std::move(value), std::move(json), std::move(response), t};
        } catch (const Error& e) {
            if (!is_parse_failure(e)) throw;
            if (ctx.trace) {
                Json ev = base_output_event(role, attempt, t, response);
                ev["score"] = nullptr;
                ev["error"] = e.what();
                ctx.trace->emit(EventKind::AgentOutput, ctx.round, std::move(ev));
            }
            if (t >= ctx.config.parse_retry_cap) {
                throw Error(ErrorCode::ParseExhausted, "ParseExhausted: " + std::string(to_string(role)) +
                                                           " agent produced " + std::to_string(t) +
                                                           " unusable outputs in a row; last: " + e.what());
            }
            prompt = user + "\n\nYour previous output could not be used (" + std::string(e.what()) +
                     "). Respond with a single JSON object in the required format.";
        }
    }
}

template <class T>
struct AttemptRecord {
    T value;
    std::string json;
    int score;
    std::string evaluation;
};

template <class T>
std::string revision_context(const std::vector<AttemptRecord<T>>& attempts, int threshold) {
    if (attempts.empty()) return {};
    std::string out = "\n\nPrevious attempts below the quality threshold:";
    for (std::size_t i = 0; i < attempts.size(); ++i) {
        const auto& a = attempts[i];
        out += "\nAttempt " + std::to_string(i + 1) + " (score " + std::to_string(a.score) + ", threshold " +
               std::to_string(threshold) + "):\n" + a.json + "\nEvaluation: " + a.evaluation;
    }
    out += "\nRevise the output to address these evaluations.";
    return out;
}

// Bounded intra-reflection loop shared by the planner and the tool agent.
template <class T, class Parse, class Annotate>
GateOutcome<T> revise_until_gate(AgentRole role, const std::string& system, const std::string& user, int threshold,
                                 Parse&& parse, Annotate&& annotate, AgentContext& ctx) {
    std::vector<AttemptRecord<T>> attempts;
    std::vector<int> scores;
    int calls = 0;
    for (int attempt = 1;; ++attempt) {
        auto reply = call_parsed<T>(role, attempt, system, user + revision_context(attempts, threshold), parse, ctx,
                                    calls);
        const int score = reply.value.reflection.score();
        scores.push_back(score);
        const GateDecision d = decide_gate(scores, threshold, ctx.config.revision_cap);
        if (ctx.trace) {
            Json ev = base_output_event(role, attempt, reply.try_index, reply.response);
            ev["score"] = score;
            ev["clamped"] = reply.value.reflection.clamped();
            ev["passed"] = gate(score, threshold);
            ev["forced"] = d.forced;
            ev["selected_attempt"] = d.accepted ? Json(static_cast<int>(*d.accepted) + 1) : Json(nullptr);
            annotate(reply.value, ev);
            ctx.trace->emit(EventKind::AgentOutput, ctx.round, std::move(ev));
        }
        std::string evaluation = reply.value.reflection.evaluation();
        attempts.push_back({std::move(reply.value), reply.json.dump(), score, std::move(evaluation)});
        if (d.accepted) {
            GateOutcome<T> out{std::move(attempts[*d.accepted].value)};
            out.attempts = attempt;
            out.forced = d.forced;
            out.passed = gate(scores[*d.accepted], threshold);
            out.backend_calls = calls;
            return out;
        }
    }
}

}  // namespace

GateOutcome<Plan> plan(const TaskSpec& task, const LongTermMemory& ltm, AgentContext& ctx) {
    const std::string system = ctx.prompts.get(PromptKind::PlannerSystem).render({});
    const std::string user = ctx.prompts.get(PromptKind::PlannerUser)
                                 .render({{"task_description", task.description},
                                          {"long_memory", ltm.render(ctx.prompts)},
                                          {"functions", render_functions(task.tools)}});
    return revise_until_gate<Plan>(
        AgentRole::Planner, system, user, ctx.config.thresholds.theta_p,
        [&](const Json& j) { return validate_plan(j, &task.tools); },
        [](const Plan& p, Json& ev) { ev["nodes"] = p.nodes.size(); }, ctx);
}

GateOutcome<ToolCall> select_tool(const TaskSpec& task, const PlanNode& node, const RelatedOutputs& related,
                                  const ShortTermMemory& stm, AgentContext& ctx) {
    if (node.status != NodeStatus::Pending) {
        throw Error(ErrorCode::InvalidArgument, "select_tool on non-pending node " + node.id);
    }
    const std::string subtask = node.subtask + "\nAssigned function: " + node.function +
                                "\nAvailable functions:\n" + render_functions(task.tools);
    const std::string system = ctx.prompts.get(PromptKind::ToolSystem).render({});
    const std::string user = ctx.prompts.get(PromptKind::ToolUser)
                                 .render({{"subtask", subtask},
                                          {"related_outputs", render_related_outputs(related)},
                                          {"short_memory", stm.render(ctx.prompts)}});
    auto outcome = revise_until_gate<ToolCall>(
        AgentRole::Tool, system, user, ctx.config.thresholds.theta_t,
        [&](const Json& j) { return validate_tool_call(j, &task.tools); },
        [&](const ToolCall& c, Json& ev) {
            ev["function"] = c.function;
            ev["divergence"] = c.function != node.function;
        },
        ctx);
    outcome.divergence = outcome.value.function != node.function;
    return outcome;
}

GateOutcome<FinalAnswer> answer(const TaskSpec& task, const std::optional<Plan>& plan,
                                const std::vector<TrajectoryStep>& trajectory, AgentContext& ctx) {
    const std::string system = ctx.prompts.get(PromptKind::AnswerSystem).render({});
    const std::string user = ctx.prompts.get(PromptKind::AnswerUser)
                                 .render({{"task_description", task.description},
                                          {"trajectory", render_trajectory(plan, trajectory)}});
    int calls = 0;
    auto reply = call_parsed<FinalAnswer>(AgentRole::Answer, 1, system, user, &validate_answer, ctx, calls);
    const int score = reply.value.reflection.score();
    const bool passed = gate(score, ctx.config.thresholds.theta_a);
    if (ctx.trace) {
        Json ev = base_output_event(AgentRole::Answer, 1, reply.try_index, reply.response);
        ev["score"] = score;
        ev["clamped"] = reply.value.reflection.clamped();
        ev["passed"] = passed;
        ev["forced"] = false;
        ev["selected_attempt"] = 1;
        ctx.trace->emit(EventKind::AgentOutput, ctx.round, std::move(ev));
    }
    GateOutcome<FinalAnswer> out{std::move(reply.value)};
    out.attempts = calls;
    out.forced = false;
    out.passed = passed;
    out.backend_calls = calls;
    return out;
}

}  // namespace mirror
