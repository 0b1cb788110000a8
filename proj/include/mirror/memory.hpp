#pragma once

#include "mirror/core.hpp"
#include "mirror/prompt.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mirror {

// Fills the memory slots when nothing has been recorded yet.
inline constexpr std::string_view kEmptyMemorySentinel = "No previous failed trajectories.";

// Chronological rendering of a round: the plan with node statuses, then one
// Action/Observation block per executed step.
std::string render_trajectory(const std::optional<Plan>& plan, const std::vector<TrajectoryStep>& steps);

struct STMEntry {
    int step = 1;
    std::string subtask;
    std::string action;
    Json action_input = Json::object();
    std::string observation;
    std::string reflection;
};

// Failed tool attempts for the subtask currently bound. Cleared when that
// subtask succeeds or the binding moves to another node.
class ShortTermMemory {
public:
    ShortTermMemory() = default;
    explicit ShortTermMemory(std::string node_id) : node_id_(std::move(node_id)) {}

    // entry.step must be last step + 1 (or 1 when empty); throws StepGap.
    void record(STMEntry entry);

    // Called when the bound subtask succeeds. Idempotent.
    void reset_on_success() { entries_.clear(); }

    // Binds to another node; entries from the old binding are dropped.
    void rebind(std::string node_id) {
        node_id_ = std::move(node_id);
        entries_.clear();
    }

    const std::string& node_id() const noexcept { return node_id_; }
    const std::vector<STMEntry>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }
    int next_step() const noexcept { return entries_.empty() ? 1 : entries_.back().step + 1; }

    std::string render(const PromptKit& kit) const;

private:
    std::string node_id_;
    std::vector<STMEntry> entries_;
};

struct LTMRecord {
    int round_index = 1;
    std::optional<Plan> plan;
    std::vector<TrajectoryStep> trajectory;
    std::string inter_reflection;
};

// Whole failed rounds for one task. Cleared at task completion.
class LongTermMemory {
public:
    explicit LongTermMemory(std::string task_id = {}) : task_id_(std::move(task_id)) {}

    // record.round_index must be last + 1 (or 1 when empty); throws RoundGap.
    void append(LTMRecord record);

    void reset_on_completion() { records_.clear(); }

    const std::string& task_id() const noexcept { return task_id_; }
    const std::vector<LTMRecord>& records() const noexcept { return records_; }
    bool empty() const noexcept { return records_.empty(); }
    std::size_t size() const noexcept { return records_.size(); }
    int next_round_index() const noexcept { return records_.empty() ? 1 : records_.back().round_index + 1; }

    std::string render(const PromptKit& kit) const;

private:
    std::string task_id_;
    std::vector<LTMRecord> records_;
};

}  // namespace mirror
