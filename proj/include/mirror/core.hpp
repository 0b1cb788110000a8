#pragma once

#include "mirror/error.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mirror {

// Insertion-ordered JSON keeps serialized documents stable byte-for-byte.
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Tools

enum class ParamKind { String, Number, Boolean, Enum };

std::string_view to_string(ParamKind kind);
std::optional<ParamKind> param_kind_from_string(std::string_view name);

struct ParamSpec {
    std::string name;
    ParamKind kind = ParamKind::String;
    bool required = false;
    std::string description;
    std::vector<std::string> allowed;  // only meaningful for ParamKind::Enum

    bool operator==(const ParamSpec&) const = default;
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<ParamSpec> parameters;

    const ParamSpec* find_param(std::string_view param) const;
    bool operator==(const ToolSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Task

enum class PredicateKind { ExpectedCalls, AnswerContains, AllNodesSucceeded };

std::string_view to_string(PredicateKind kind);
std::optional<PredicateKind> predicate_kind_from_string(std::string_view name);

struct ExpectedCall {
    std::string function;
    Json parameters = Json::object();  // subset that must match

    bool operator==(const ExpectedCall&) const = default;
};

struct SuccessPredicate {
    PredicateKind kind = PredicateKind::AllNodesSucceeded;
    std::vector<ExpectedCall> expected_calls;   // ExpectedCalls
    std::vector<std::string> required_substrings;  // AnswerContains

    bool operator==(const SuccessPredicate&) const = default;
};

struct TaskSpec {
    std::string id;
    std::string description;
    std::vector<ToolSpec> tools;
    SuccessPredicate success_check;

    const ToolSpec* find_tool(std::string_view name) const;
    bool operator==(const TaskSpec&) const = default;
};

struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const noexcept { return violations.empty(); }
};

ValidationReport validate_task(const TaskSpec& task);

// Checks id uniqueness across a suite in addition to per-task invariants.
ValidationReport validate_suite(const std::vector<TaskSpec>& tasks);

// ---------------------------------------------------------------------------
// Reflection and agent outputs

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 10;

// An agent's self-evaluation. The score is always in [1,10]; constructing
// one outside that range throws.
class IntraReflection {
public:
    IntraReflection(std::string evaluation, int score, bool clamped = false);

    // Model scores may be fractional or out of range: floor, then clamp to
    // [1,10]. clamped() reports whether the clamp changed the floored value.
    static IntraReflection from_model_score(std::string evaluation, double raw_score);

    const std::string& evaluation() const noexcept { return evaluation_; }
    int score() const noexcept { return score_; }
    bool clamped() const noexcept { return clamped_; }

    bool operator==(const IntraReflection&) const = default;

private:
    std::string evaluation_;
    int score_;
    bool clamped_;
};

enum class NodeStatus { Pending = 0, Succeeded = 1, Failed = 2 };

std::string_view to_string(NodeStatus status);

struct PlanNode {
    std::string id;
    NodeStatus status = NodeStatus::Pending;
    std::string subtask;
    std::string function;

    bool operator==(const PlanNode&) const = default;
};

// Throws Error(IllegalTransition) unless the move is Pending->Succeeded or
// Pending->Failed.
PlanNode node_transition(const PlanNode& node, NodeStatus to);

struct Plan {
    std::vector<PlanNode> nodes;
    IntraReflection reflection;
};

struct ToolCall {
    std::string function;
    Json parameters = Json::object();
    IntraReflection reflection;
};

struct FinalAnswer {
    std::string text;
    IntraReflection reflection;
};

// ---------------------------------------------------------------------------
// Execution

enum class ExecStatus { Ok, ToolNotFound, InvalidParameters, SimulatedFailure };

std::string_view to_string(ExecStatus status);
std::optional<ExecStatus> exec_status_from_string(std::string_view name);

struct ExecutionResult {
    ExecStatus status = ExecStatus::Ok;
    std::string payload;

    bool ok() const noexcept { return status == ExecStatus::Ok; }
    bool operator==(const ExecutionResult&) const = default;
};

struct TrajectoryStep {
    std::string node_id;
    std::string subtask;
    ToolCall call;
    ExecutionResult observation;
    int attempt_index = 1;
};

// ---------------------------------------------------------------------------
// Configuration

struct Thresholds {
    int theta_p = 9;
    int theta_t = 8;
    int theta_a = 8;
};

struct RunConfig {
    Thresholds thresholds;
    int max_rounds = 5;
    int revision_cap = 3;
    int subtask_retry_cap = 3;
    int parse_retry_cap = 2;
    std::string model = "gpt-4o-mini";
    double temperature = 0.0;

    // Throws Error(InvalidArgument) naming the first bad field.
    void validate() const;
};

// ---------------------------------------------------------------------------
// JSON (de)serialization. from_json functions throw SchemaError with the path
// of every offending field.

Json to_json(const ParamSpec& p);
Json to_json(const ToolSpec& t);
Json to_json(const SuccessPredicate& s);
Json to_json(const TaskSpec& t);
Json to_json(const RunConfig& c);

ToolSpec tool_spec_from_json(const Json& j, const std::string& path = "tool");
TaskSpec task_from_json(const Json& j);
// Fields absent from j keep the values already in base.
RunConfig config_from_json(const Json& j, RunConfig base = {});

// Canonical on-disk form: two-space indent, fixed key order, trailing newline.
std::string serialize_task(const TaskSpec& task);

TaskSpec load_task_file(const std::string& path);
Json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace mirror
