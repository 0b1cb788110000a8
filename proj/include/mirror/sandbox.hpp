#pragma once

#include "mirror/core.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mirror {

// Matches one parameter value. Written in a suite file either as a bare JSON
// value (equality) or as an object with one of:
//   {"equals": v} {"contains": "sub"} {"present": true|false} {"one_of": [..]}
struct ParamMatcher {
    enum class Op { Equals, Contains, Present, OneOf };
    Op op = Op::Equals;
    Json operand;

    bool matches(const Json* value) const;
};

struct CallIndexMatcher {
    enum class Op { Exactly, AtMost, AtLeast };
    Op op = Op::Exactly;
    int n = 1;

    bool matches(int call_index) const;
};

struct BehaviorRule {
    std::map<std::string, ParamMatcher> params;
    std::optional<CallIndexMatcher> call_index;
    ExecutionResult result;
};

struct SandboxTool {
    ToolSpec spec;
    std::vector<BehaviorRule> rules;  // first match wins
    ExecutionResult fallback;         // the suite file's "default"
};

// Read-only set of simulated tools. Suite file:
//   {"tools":[{"spec": ToolSpec,
//              "rules":[{"when":{"params":{...}, "call_index": 1 | {"at_most": n}},
//                        "result":{"status": "...", "payload": "..."}}],
//              "default":{"status": "...", "payload": "..."}}]}
class ToolRegistry {
public:
    ToolRegistry() = default;
    explicit ToolRegistry(std::vector<SandboxTool> tools);

    // Throws SchemaError with the path to the offending entry.
    static ToolRegistry from_json(const Json& j);
    static ToolRegistry load(const std::string& path);

    const SandboxTool* find(std::string_view name) const;
    std::size_t size() const noexcept { return tools_.size(); }
    std::vector<ToolSpec> specs() const;

private:
    std::vector<SandboxTool> tools_;
};

// Per-run view of a registry holding the call counters. execute() never
// throws for bad calls: every failure comes back as an ExecutionResult.
class SandboxSession {
public:
    explicit SandboxSession(const ToolRegistry& registry) : registry_(&registry) {}

    ExecutionResult execute(const ToolCall& call);
    void reset_counters() { counters_.clear(); }
    int calls_made(const std::string& tool) const;

private:
    const ToolRegistry* registry_;
    std::map<std::string, int> counters_;
};

inline ExecutionResult execute(const ToolCall& call, SandboxSession& session) { return session.execute(call); }

// Parameter validation used by execute(); empty when the call is valid.
std::vector<std::string> check_parameters(const ToolSpec& spec, const Json& parameters);

}  // namespace mirror
