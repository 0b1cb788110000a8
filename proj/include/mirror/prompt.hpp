#pragma once

#include "mirror/core.hpp"

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mirror {

std::string sha256_hex(std::string_view data);

enum class PromptKind {
    PlannerSystem,
    PlannerUser,
    ToolSystem,
    ToolUser,
    AnswerSystem,
    AnswerUser,
    LTMEntry,
    STMEntry,
};

inline constexpr std::array<PromptKind, 8> kAllPromptKinds = {
    PromptKind::PlannerSystem, PromptKind::PlannerUser, PromptKind::ToolSystem,
    PromptKind::ToolUser,      PromptKind::AnswerSystem, PromptKind::AnswerUser,
    PromptKind::LTMEntry,      PromptKind::STMEntry,
};

std::string_view to_string(PromptKind kind);

// File name of the template inside a prompts directory, e.g. "PlannerUser.txt".
std::string prompt_file_name(PromptKind kind);

// A slot is written `{name}` or `{{name}}` where name matches
// [A-Za-z_][A-Za-z0-9_-]*. Anything else in braces (JSON samples in the
// system prompts) is literal text.
class PromptTemplate {
public:
    PromptTemplate(PromptKind kind, std::string body);

    PromptKind kind() const noexcept { return kind_; }
    const std::string& body() const noexcept { return body_; }
    // Slot names in order of first appearance.
    const std::vector<std::string>& placeholders() const noexcept { return placeholders_; }

    // Replaces every slot in one pass; slot values are never rescanned, so
    // braces inside them pass through untouched. Throws MissingSlot.
    std::string render(const std::map<std::string, std::string>& slots) const;

private:
    struct Segment {
        bool is_slot;
        std::string text;  // literal text, or slot name
    };

    PromptKind kind_;
    std::string body_;
    std::vector<Segment> segments_;
    std::vector<std::string> placeholders_;
};

inline std::string render(const PromptTemplate& tmpl, const std::map<std::string, std::string>& slots) {
    return tmpl.render(slots);
}

// The eight templates loaded from a directory. Immutable after load.
class PromptKit {
public:
    // Reads <dir>/<Kind>.txt for every kind. Throws Error(IoError).
    static PromptKit load(const std::string& dir);

    const PromptTemplate& get(PromptKind kind) const;

    // Compares each template's SHA-256 with <dir>/MANIFEST.sha256 (sha256sum
    // format). Returns one message per mismatch or missing entry.
    std::vector<std::string> verify_manifest(const std::string& manifest_path) const;

    const std::string& directory() const noexcept { return dir_; }

private:
    PromptKit() = default;
    std::string dir_;
    std::vector<PromptTemplate> templates_;
};

// Default prompts directory baked in at build time (overridable at runtime).
std::string default_prompts_dir();

// ---------------------------------------------------------------------------
// Agent output handling

// First balanced top-level JSON object in raw. Braces inside strings are
// respected; fences and surrounding prose are skipped. A balanced candidate
// that fails to parse is skipped as a whole, a brace that never closes is
// skipped alone; if no candidate parses, the first error is reported.
// Throws Error(NoJsonFound) or MalformedJson (offset into raw).
Json extract_json(std::string_view raw);

enum class OutputKind { PlannerOut, ToolOut, AnswerOut };

std::string_view to_string(OutputKind kind);

using AgentOutput = std::variant<Plan, ToolCall, FinalAnswer>;

// Builds the typed value or throws SchemaError listing every missing or
// mistyped field. When tools is non-null, plan nodes and tool calls must
// name one of them.
AgentOutput validate_output(const Json& value, OutputKind kind, const std::vector<ToolSpec>* tools = nullptr);

Plan validate_plan(const Json& value, const std::vector<ToolSpec>* tools = nullptr);
ToolCall validate_tool_call(const Json& value, const std::vector<ToolSpec>* tools = nullptr);
FinalAnswer validate_answer(const Json& value);

}  // namespace mirror
