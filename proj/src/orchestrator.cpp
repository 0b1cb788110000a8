#include "mirror/orchestrator.hpp"

namespace mirror {

std::string_view to_string(RunStatus status) {
    switch (status) {
        case RunStatus::Running: return "Running";
        case RunStatus::Accepted: return "Accepted";
        case RunStatus::Exhausted: return "Exhausted";
        case RunStatus::Aborted: return "Aborted";
    }
    return "Running";
}

std::optional<RunStatus> run_status_from_string(std::string_view name) {
    if (name == "Running") return RunStatus::Running;
    if (name == "Accepted") return RunStatus::Accepted;
    if (name == "Exhausted") return RunStatus::Exhausted;
    if (name == "Aborted") return RunStatus::Aborted;
    return std::nullopt;
}

namespace {

std::string describe(const ExecutionResult& r) {
    return "[" + std::string(to_string(r.status)) + "] " + r.payload;
}

void remember_answer(RunState& st, const FinalAnswer& ans) {
    if (st.best_answer && ans.reflection.score() <= st.best_answer->reflection.score()) return;
    st.best_answer = ans;
    st.best_answer_round = st.round;
    st.best_plan = st.current_plan;
    st.best_trajectory = st.trajectory;
}

}  // namespace

void run_round(RunState& st, RunContext& ctx) {
    if (st.status != RunStatus::Running) {
        throw Error(ErrorCode::InvalidArgument, "run_round on a finished run");
    }
    ++st.round;
    st.trajectory.clear();
    st.current_plan.reset();
    ctx.trace.emit(EventKind::RoundStart, st.round, Json{{"ltm_size", st.ltm.size()}});

    AgentContext actx{ctx.backend, ctx.prompts, ctx.config, &ctx.trace, st.round, &ctx.tokens};
    const TaskSpec& task = *st.task;

    st.current_plan = plan(task, st.ltm, actx).value;
    auto& nodes = st.current_plan->nodes;

    std::optional<std::string> execution_failure;
    if (nodes.empty()) {
        execution_failure = "Execution failed: the plan contained no subtasks (plan score " +
                            std::to_string(st.current_plan->reflection.score()) + "), so nothing was executed.";
    }

    RelatedOutputs related;
    for (auto& node : nodes) {
        if (execution_failure) break;
        st.stm.rebind(node.id);
        bool succeeded = false;
        ExecutionResult last;
        for (int attempt = 1; attempt <= ctx.config.subtask_retry_cap; ++attempt) {
            auto selection = select_tool(task, node, related, st.stm, actx);
            const ToolCall& call = selection.value;
            last = ctx.sandbox.execute(call);
            ctx.trace.emit(EventKind::Execute, st.round,
                           Json{{"node_id", node.id},
                                {"attempt", attempt},
                                {"function", call.function},
                                {"parameters", call.parameters},
                                {"score", call.reflection.score()},
                                {"forced", selection.forced},
                                {"divergence", selection.divergence},
                                {"status", to_string(last.status)},
                                {"payload", last.payload}});
            st.trajectory.push_back(TrajectoryStep{node.id, node.subtask, call, last, attempt});

            if (last.ok()) {
                node = node_transition(node, NodeStatus::Succeeded);
                related.emplace_back(node.id, last.payload);
                const auto cleared = st.stm.size();
                st.stm.reset_on_success();
                ctx.trace.emit(EventKind::StmReset, st.round,
                               Json{{"node_id", node.id}, {"reason", "success"}, {"cleared", cleared}});
                succeeded = true;
                break;
            }
            st.stm.record(STMEntry{st.stm.next_step(), node.subtask, call.function, call.parameters, describe(last),
                                   call.reflection.evaluation()});
            ctx.trace.emit(EventKind::StmRecord, st.round,
                           Json{{"node_id", node.id},
                                {"step", st.stm.entries().back().step},
                                {"stm_size", st.stm.size()},
                                {"status", to_string(last.status)}});
        }
        if (!succeeded) {
            node = node_transition(node, NodeStatus::Failed);
            const auto cleared = st.stm.size();
            st.stm.rebind({});
            ctx.trace.emit(EventKind::StmReset, st.round,
                           Json{{"node_id", node.id}, {"reason", "node_failed"}, {"cleared", cleared}});
            execution_failure = "Execution failed at " + node.id + " (" + node.subtask + ") after " +
                                std::to_string(ctx.config.subtask_retry_cap) + " attempts: " + describe(last);
        }
    }

    std::string inter_reflection;
    Json round_end{{"outcome", ""}};
    if (!execution_failure) {
        auto ans = answer(task, st.current_plan, st.trajectory, actx);
        remember_answer(st, ans.value);
        round_end["answer_score"] = ans.value.reflection.score();
        if (ans.passed) {
            st.status = RunStatus::Accepted;
            round_end["outcome"] = "accepted";
            round_end["failed_rounds"] = st.failed_rounds;
            round_end["ltm_size"] = st.ltm.size();
            ctx.trace.emit(EventKind::RoundEnd, st.round, std::move(round_end));
            return;
        }
        round_end["outcome"] = "answer_rejected";
        inter_reflection = "Final answer scored " + std::to_string(ans.value.reflection.score()) +
                           ", below the answer threshold " + std::to_string(ctx.config.thresholds.theta_a) +
                           ".\nAnswer: " + ans.value.text + "\nEvaluation: " + ans.value.reflection.evaluation();
    } else {
        round_end["outcome"] = "execution_failed";
        round_end["answer_score"] = nullptr;
        inter_reflection = *execution_failure;
    }

    st.ltm.append(LTMRecord{st.round, st.current_plan, st.trajectory, inter_reflection});
    ++st.failed_rounds;
    ctx.trace.emit(EventKind::LtmAppend, st.round,
                   Json{{"round_index", st.round}, {"ltm_size", st.ltm.size()}, {"inter_reflection", inter_reflection}});
    round_end["failed_rounds"] = st.failed_rounds;
    round_end["ltm_size"] = st.ltm.size();
    ctx.trace.emit(EventKind::RoundEnd, st.round, std::move(round_end));
}

RunResult run_task(const TaskSpec& task, const RunConfig& config, ChatBackend& backend, const ToolRegistry& registry,
                   const PromptKit& prompts) {
    config.validate();
    if (auto report = validate_task(task); !report.ok()) {
        throw Error(ErrorCode::InvalidArgument, "task " + task.id + " is not runnable: " + report.violations.front());
    }

    RunResult result;
    result.task_id = task.id;
    result.trace = EventTrace(task.id);
    SandboxSession sandbox(registry);
    RunContext ctx{config, backend, prompts, sandbox, result.trace, {}};
    RunState st(task);

    try {
        while (st.status == RunStatus::Running && st.round < config.max_rounds) run_round(st, ctx);
        if (st.status == RunStatus::Running) st.status = RunStatus::Exhausted;
    } catch (const Error& e) {
        st.status = RunStatus::Aborted;
        result.error = e.what();
        ctx.trace.emit(EventKind::RoundEnd, st.round,
                       Json{{"outcome", "aborted"},
                            {"error", result.error},
                            {"failed_rounds", st.failed_rounds},
                            {"ltm_size", st.ltm.size()}});
    }

    if (!st.stm.empty()) {
        const auto cleared = st.stm.size();
        const std::string node_id = st.stm.node_id();
        st.stm.rebind({});
        ctx.trace.emit(EventKind::StmReset, st.round,
                       Json{{"node_id", node_id}, {"reason", "run_end"}, {"cleared", cleared}});
    }
    const auto ltm_cleared = st.ltm.size();
    st.ltm.reset_on_completion();
    ctx.trace.emit(EventKind::LtmReset, st.round,
                   Json{{"reason", to_string(st.status)}, {"cleared", ltm_cleared}});

    result.status = st.status;
    result.rounds_used = st.round;
    result.tokens = ctx.tokens;
    if (st.status == RunStatus::Accepted) {
        // The accepted answer is always the best one: every earlier answer failed the gate.
        result.final_answer = st.best_answer;
        result.final_answer_round = st.round;
        result.final_plan = st.current_plan;
        result.final_trajectory = st.trajectory;
    } else if (st.best_answer) {
        result.final_answer = st.best_answer;
        result.final_answer_round = st.best_answer_round;
        result.final_plan = st.best_plan;
        result.final_trajectory = st.best_trajectory;
    }

    Json end{{"status", to_string(st.status)},
             {"rounds_used", st.round},
             {"prompt_tokens", result.tokens.prompt_total},
             {"completion_tokens", result.tokens.completion_total},
             {"calls", result.tokens.call_count},
             {"ltm_size", st.ltm.size()},
             {"stm_size", st.stm.size()},
             {"final_answer_score",
              result.final_answer ? Json(result.final_answer->reflection.score()) : Json(nullptr)},
             {"final_answer_round", result.final_answer_round}};
    if (!result.error.empty()) end["error"] = result.error;
    ctx.trace.emit(EventKind::RunEnd, st.round, std::move(end));
    return result;
}

TokenTotals fold_tokens(const EventTrace& trace) {
    TokenTotals t;
    for (const auto& e : trace.events()) {
        if (e.kind != EventKind::AgentOutput) continue;
        t.prompt_total += e.data.at("prompt_tokens").get<std::int64_t>();
        t.completion_total += e.data.at("completion_tokens").get<std::int64_t>();
        t.call_count += 1;
    }
    return t;
}

}  // namespace mirror
