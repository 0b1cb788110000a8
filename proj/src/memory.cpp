#include "mirror/memory.hpp"

namespace mirror {

std::string render_trajectory(const std::optional<Plan>& plan, const std::vector<TrajectoryStep>& steps) {
    std::string out;
    if (plan) {
        out += "Plan:\n";
        for (std::size_t i = 0; i < plan->nodes.size(); ++i) {
            const auto& n = plan->nodes[i];
            out += std::to_string(i + 1) + ". " + n.id + " [" + std::string(to_string(n.status)) + "] " +
                   n.subtask + " -> " + n.function + "\n";
        }
        if (plan->nodes.empty()) out += "(no subtasks)\n";
        out += "Plan score: " + std::to_string(plan->reflection.score()) + "\n";
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        if (!out.empty()) out += "\n";
        out += "Step " + std::to_string(i + 1) + " (" + s.node_id + ", attempt " + std::to_string(s.attempt_index) +
               ")\n";
        out += "Subtask: " + s.subtask + "\n";
        out += "Action: " + s.call.function + "\n";
        out += "Action Input: " + s.call.parameters.dump() + "\n";
        out += "Observation: [" + std::string(to_string(s.observation.status)) + "] " + s.observation.payload + "\n";
    }
    if (out.empty()) out = "(empty trajectory)\n";
    return out;
}

void ShortTermMemory::record(STMEntry entry) {
    if (entry.step != next_step()) {
        throw Error(ErrorCode::StepGap, "StepGap: expected step " + std::to_string(next_step()) + ", got " +
                                            std::to_string(entry.step));
    }
    entries_.push_back(std::move(entry));
}

std::string ShortTermMemory::render(const PromptKit& kit) const {
    if (entries_.empty()) return std::string(kEmptyMemorySentinel);
    const auto& tmpl = kit.get(PromptKind::STMEntry);
    std::string out;
    for (const auto& e : entries_) {
        if (!out.empty()) out += "\n";
        out += tmpl.render({
            {"step", std::to_string(e.step)},
            {"subtask", e.subtask},
            {"function_name", e.action},
            {"parameters", e.action_input.dump()},
            {"observation", e.observation},
        });
    }
    return out;
}

void LongTermMemory::append(LTMRecord record) {
    if (record.round_index != next_round_index()) {
        throw Error(ErrorCode::RoundGap, "RoundGap: expected round " + std::to_string(next_round_index()) +
                                             ", got " + std::to_string(record.round_index));
    }
    records_.push_back(std::move(record));
}

std::string LongTermMemory::render(const PromptKit& kit) const {
    if (records_.empty()) return std::string(kEmptyMemorySentinel);
    const auto& tmpl = kit.get(PromptKind::LTMEntry);
    std::string out;
    for (const auto& r : records_) {
        if (!out.empty()) out += "\n";
        std::string trajectory = render_trajectory(r.plan, r.trajectory);
        if (!trajectory.empty() && trajectory.back() == '\n') trajectory.pop_back();
        out += tmpl.render({
            {"round_index", std::to_string(r.round_index)},
            {"trajectory", trajectory},
            {"inter-reflection", r.inter_reflection},
        });
    }
    return out;
}

}  // namespace mirror
